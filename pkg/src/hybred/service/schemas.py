"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class SimulateRequest(BaseModel):
    spec: dict[str, Any] = Field(description="system spec (same schema as the JSON spec file)")
    x0: Optional[list[float]] = None
    T: Optional[float] = None
    h: Optional[float] = None
    method: Optional[str] = None


class VerifyRequest(BaseModel):
    spec: dict[str, Any]
    seed: Optional[int] = None


class ReduceRequest(BaseModel):
    spec: dict[str, Any]
    mu: list[float]
    seed: Optional[int] = None


class CompareRequest(BaseModel):
    spec: dict[str, Any]
    x0: Optional[list[float]] = None
    T: Optional[float] = None
    h: Optional[float] = None
    seed: Optional[int] = None
    tol_state: Optional[float] = None
    tol_time: Optional[float] = None


class TrajectoryTable(BaseModel):
    columns: list[str]
    rows: list[list[float]]


class SimulateResponse(BaseModel):
    status: str  # "ok" | "zeno"
    message: str = ""
    method: str
    trajectory: TrajectoryTable
    impacts: list[dict[str, Any]]
    n_segments: int
    tangential_events: list[dict[str, Any]]


class VerifyResponse(BaseModel):
    report: dict[str, Any]


class ReduceResponse(BaseModel):
    summary: dict[str, Any]


class CompareResponse(BaseModel):
    mu0: list[float]
    report: dict[str, Any]
    chart_sequence: list[list[float]]
    full_projected: TrajectoryTable
    reduced: TrajectoryTable


class ErrorDetail(BaseModel):
    type: str
    message: str


class ErrorResponse(BaseModel):
    error: ErrorDetail
