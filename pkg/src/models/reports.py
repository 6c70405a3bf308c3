from datetime import datetime
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class InvariantCheck(BaseModel):
    id: str = Field(..., description="Acceptance id, e.g. 'AC-4'")
    name: str
    residual: float
    tolerance: float
    passed: bool
    detail: Optional[str] = None


class RunManifest(BaseModel):
    subcommand: str
    inputs: List[str] = Field(default_factory=list, description="Input file paths")
    arguments: Dict[str, str] = Field(default_factory=dict)
    seed: int
    tolerances: Dict[str, float] = Field(default_factory=dict)
    tool_version: str
    started_at: datetime = Field(default_factory=datetime.now)
    wall_time: float = 0.0
    outputs: List[str] = Field(default_factory=list)
