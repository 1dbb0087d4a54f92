"""Depleting privacy budget under basic sequential composition"""
import enum
import logging
import threading
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

from .noise import InvalidParameterException, PrivacyParams

logger = logging.getLogger(__name__)

# absorbs float rounding so that charging exactly up to the total is accepted
TOLERANCE = 1e-12


Cost = Union[PrivacyParams, Tuple[float, float]]


def _as_pair(params: Cost) -> Tuple[float, float]:
    if isinstance(params, PrivacyParams):
        return params.epsilon, params.delta
    epsilon, delta = params
    if epsilon < 0 or delta < 0:
        raise InvalidParameterException(f"Negative privacy cost ({epsilon}, {delta})")
    return float(epsilon), float(delta)


class ChargeResult(enum.Enum):
    ACCEPTED = "accepted"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class LineItem:
    query: str
    epsilon: float
    delta: float


class PrivacyBudget:
    def __init__(self, epsilon_total: float, delta_total: float = 0.0):
        if epsilon_total < 0 or not 0 <= delta_total < 1:
            raise InvalidParameterException(
                f"Invalid budget totals ({epsilon_total}, {delta_total})"
            )
        self.epsilon_total = epsilon_total
        self.delta_total = delta_total
        self.epsilon_spent = 0.0
        self.delta_spent = 0.0
        self.line_items: List[LineItem] = []
        self._lock = threading.Lock()

    @property
    def epsilon_remaining(self) -> float:
        return max(0.0, self.epsilon_total - self.epsilon_spent)

    @property
    def delta_remaining(self) -> float:
        return max(0.0, self.delta_total - self.delta_spent)

    def charge(self, params: Cost, query: str = "") -> ChargeResult:
        """Spends (epsilon, delta) if both fit in what is left, otherwise refuses

        A plain (epsilon, delta) tuple is accepted for costs PrivacyParams cannot
        express, such as epsilon = 0.
        """
        spend_epsilon, spend_delta = _as_pair(params)
        with self._lock:
            epsilon = self.epsilon_spent + spend_epsilon
            delta = self.delta_spent + spend_delta
            if (
                epsilon > self.epsilon_total + TOLERANCE
                or delta > self.delta_total + TOLERANCE
            ):
                logger.warning(
                    "Refused %s charge of (%g, %g), remaining (%g, %g)",
                    query or "query",
                    spend_epsilon,
                    spend_delta,
                    self.epsilon_remaining,
                    self.delta_remaining,
                )
                return ChargeResult.EXHAUSTED
            self.epsilon_spent = epsilon
            self.delta_spent = delta
            self.line_items.append(LineItem(query, spend_epsilon, spend_delta))
            return ChargeResult.ACCEPTED

    def remaining(self) -> Dict[str, float]:
        return {"epsilon": self.epsilon_remaining, "delta": self.delta_remaining}

    def report(self) -> Dict:
        return {
            "totals": {"epsilon": self.epsilon_total, "delta": self.delta_total},
            "spent": {"epsilon": self.epsilon_spent, "delta": self.delta_spent},
            "line_items": [
                {"query": item.query, "epsilon": item.epsilon, "delta": item.delta}
                for item in self.line_items
            ],
        }

    @classmethod
    def from_report(cls, report: Dict) -> "PrivacyBudget":
        """Rebuilds a ledger by replaying its line items against the totals"""
        budget = cls(report["totals"]["epsilon"], report["totals"]["delta"])
        for item in report.get("line_items", []):
            budget.epsilon_spent += item["epsilon"]
            budget.delta_spent += item["delta"]
            budget.line_items.append(
                LineItem(item["query"], item["epsilon"], item["delta"])
            )
        return budget


def charge(
    budget: PrivacyBudget, params: Cost, query: Optional[str] = None
) -> ChargeResult:
    return budget.charge(params, query or "")
