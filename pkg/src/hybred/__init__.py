"""Hybrid Hamiltonian systems: simulation, symmetry verification, and
momentum-map reduction for abelian translation symmetries."""

from .systemspec import SystemSpec, load_spec, spec_from_dict

__version__ = "0.1.0"

__all__ = ["SystemSpec", "load_spec", "spec_from_dict", "__version__"]
