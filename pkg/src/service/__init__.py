from service.evaluation_service import EvaluationService
from service.features_service import FeaturesService
from service.fitter_service import FitterService
from service.ingest_service import IngestService
from service.simulator_service import SimulatorService

__all__ = ["IngestService", "SimulatorService", "FitterService", "EvaluationService", "FeaturesService"]
