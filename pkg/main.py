"""
RVNS Collector FastAPI Backend
Collects negative-survey reports for one survey and reconstructs the
population density on demand.
"""

import logging
import threading
from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from rvns_core import DataRange, PerturbationConfig, PerturbedReport, make_uniform_grid
from rvns_errors import InfeasibleProblemError, InvalidArgumentError, RvnsError
from rvns_io import reconstruction_to_dict
from rvns_kde import KdeConfig
from rvns_perturbation import ldp_budget
from rvns_reconstruction import ReconstructionConfig, reconstruct
from settings import configure_logging, load_settings

settings = load_settings()
configure_logging(settings.log_level)
logger = logging.getLogger(__name__)

survey = PerturbationConfig(range=DataRange(a=settings.a, b=settings.b), d=settings.d, k=settings.k)

# Initialize FastAPI app
app = FastAPI(
    title="RVNS Collector API",
    description="Collects real-value negative survey reports and reconstructs the population density",
    version="1.0.0"
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],  # In production, specify your survey client domain
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


class ReportStore:
    """In-process report list shared by all request handlers."""

    def __init__(self):
        self._lock = threading.Lock()
        self._reports: List[PerturbedReport] = []

    def add(self, report: PerturbedReport) -> int:
        with self._lock:
            self._reports.append(report)
            return len(self._reports)

    def snapshot(self) -> List[PerturbedReport]:
        with self._lock:
            return list(self._reports)

    def count(self) -> int:
        with self._lock:
            return len(self._reports)

    def clear(self) -> int:
        with self._lock:
            removed = len(self._reports)
            self._reports.clear()
            return removed


store = ReportStore()


# Pydantic models
class ReportRequest(BaseModel):
    user_id: str
    samples: List[float]


class ReconstructRequest(BaseModel):
    m: Optional[int] = None
    bandwidth: Optional[float] = None
    lambda1: Optional[float] = None
    lambda2: Optional[float] = None


class BudgetRequest(BaseModel):
    delta: float


class ReconstructResponse(BaseModel):
    grid: List[float]
    auxiliary: float
    density: List[float]
    objective: float
    constraint_residual: float
    optimality_residual: float
    iterations: int
    converged: bool
    reports: int


# Helper functions
def survey_description() -> Dict:
    return {"a": survey.range.a, "b": survey.range.b, "d": survey.d, "k": survey.k, "m": settings.m}


def accept_report(request: ReportRequest) -> int:
    """Validate one user's samples against the survey and store them."""
    try:
        report = PerturbedReport(user_id=request.user_id, samples=request.samples)
        report.validate_against(survey)
    except InvalidArgumentError as e:
        print(f"❌ Rejected report from {request.user_id}: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    total = store.add(report)
    logger.debug("📥 Stored report %s (%d total)", request.user_id, total)
    return total


def reconstruct_collected(request: ReconstructRequest) -> Dict:
    reports = store.snapshot()
    if not reports:
        raise HTTPException(status_code=400, detail="No reports collected yet")

    defaults = ReconstructionConfig.from_settings(settings)
    try:
        rconfig = ReconstructionConfig(
            **{
                **defaults.model_dump(),
                "lambda1": defaults.lambda1 if request.lambda1 is None else request.lambda1,
                "lambda2": defaults.lambda2 if request.lambda2 is None else request.lambda2,
            }
        )
        grid = make_uniform_grid(survey.range, request.m or settings.m)
        print(f"🔍 Reconstructing from {len(reports)} reports on {grid.m} grid points...")
        result = reconstruct(reports, grid, survey, KdeConfig(bandwidth=request.bandwidth), rconfig)
    except (InvalidArgumentError, InfeasibleProblemError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except RvnsError as e:
        print(f"❌ Reconstruction error: {str(e)}")
        raise HTTPException(status_code=500, detail=f"Reconstruction error: {str(e)}")

    print("✅ Reconstruction finished" + ("" if result.converged else " without convergence"))
    return {**reconstruction_to_dict(result), "reports": len(reports)}


# API endpoints
@app.get("/")
async def root():
    """Service info."""
    return {
        "message": "RVNS Collector API is running!",
        "version": "1.0.0",
        "endpoints": {
            "reports": "/reports",
            "count": "/reports/count",
            "reconstruct": "/reconstruct",
            "budget": "/budget"
        }
    }


@app.get("/health")
async def health_check():
    """Health check with the survey configuration."""
    return {
        "status": "healthy",
        "survey": survey_description(),
        "reports": store.count(),
    }


@app.post("/reports")
async def submit_report(request: ReportRequest):
    """Accept one user's perturbed samples."""
    total = accept_report(request)
    return {"accepted": True, "reports": total}


@app.get("/reports/count")
async def report_count():
    return {"reports": store.count()}


@app.delete("/reports")
async def clear_reports():
    """Drop every collected report."""
    removed = store.clear()
    print(f"🗑️ Cleared {removed} reports")
    return {"removed": removed}


@app.post("/reconstruct", response_model=ReconstructResponse)
def reconstruct_endpoint(request: Optional[ReconstructRequest] = None):
    """Reconstruct the population density from the collected reports."""
    return reconstruct_collected(request or ReconstructRequest())


@app.post("/budget")
async def budget_endpoint(request: BudgetRequest):
    """Privacy budget of the survey for neighborhoods of half-width delta."""
    try:
        budget = ldp_budget(survey, request.delta)
    except InvalidArgumentError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return budget.model_dump()


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
