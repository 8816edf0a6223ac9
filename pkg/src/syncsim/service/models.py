"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class RunRequest(BaseModel):
    config: dict = Field(description="A schema-1 scenario document")
    seed: Optional[int] = Field(default=None, description="Overrides the document's seed")


class ValidateRequest(BaseModel):
    config: dict


class ValidateResponse(BaseModel):
    valid: bool
    normalized: dict


class ErrorDetail(BaseModel):
    type: str
    path: Optional[str] = None
    message: str


class ErrorResponse(BaseModel):
    error: ErrorDetail


class Table1Row(BaseModel):
    iou_threshold: float
    tolerance_ms: List[int]


class Table1Response(BaseModel):
    object_length_m: float
    velocities_mps: List[int]
    rows: List[Table1Row]


class SpeedExampleResponse(BaseModel):
    observation: dict
    true_mps: float
    biased_mps: float
    error_mps: float
