"""Recommend-then-auction marketplace for EV rideshare, battery-swap and V2G tasks."""

from .domain import Bid, EnergyBudget, Task, TaskType, Worker, WorkerStatus, eligible, energy_to_perform
from .potr import PotrInfeasible, RecommendationMatrix, solve_potr
from .cars import CarsState, PreferenceModel
from .wibs import Assignment, WibsInfeasible, bmw, second_price_payments, solve_wibs_exact
from .baseline import bg_assign, pk_topk
from .sim import VARIANTS, RunReport, Scenario, run

__all__ = [
    "Assignment", "Bid", "CarsState", "EnergyBudget", "PotrInfeasible", "PreferenceModel",
    "RecommendationMatrix", "RunReport", "Scenario", "Task", "TaskType", "VARIANTS", "WibsInfeasible",
    "Worker", "WorkerStatus", "bg_assign", "bmw", "eligible", "energy_to_perform", "pk_topk", "run",
    "second_price_payments", "solve_potr", "solve_wibs_exact",
]
