from .compliance import ComplianceAgent, ComplianceDecision, UserProfile
from .issuance import IssuanceAgent
from .market_maker import MarketMakerAgent, MMConfig
from .risk import AdmissionGate, RiskAgent, RiskAlert, RiskConfig
from .orchestrator import Orchestrator

__all__ = [
    "AdmissionGate",
    "ComplianceAgent",
    "ComplianceDecision",
    "IssuanceAgent",
    "MMConfig",
    "MarketMakerAgent",
    "Orchestrator",
    "RiskAgent",
    "RiskAlert",
    "RiskConfig",
    "UserProfile",
]
