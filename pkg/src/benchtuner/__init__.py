"""Tune parameterized benchmark generators until a target model lands on
a requested difficulty.

The packaged pieces: declarative parameter spaces with validation and
projection (paramspace), two verifiable problem generators plus a
synthetic stand-in (arith, spatial, synthetic, envs), target backends
(targets), proposal strategies from uniform sampling to a designer model
(designers), the search and evaluation loops with resumable logs
(search), gap and interval arithmetic (metrics), report tables and
figures (reporting), and a CLI binding it together (cli).
"""

from .designers import (HistoryEntry, PPRBuffer, SurrogateModel,
                        bon_ml_select, bon_tm_select, llm_propose,
                        make_designer, propose, rs_ppr_step,
                        summarize_feedback, train_surrogate)
from .envs import Environment, env_names, get_env
from .gateway import (ChatRequest, ChatResponse, HttpGateway, RecordingGateway,
                      ReplayGateway, TranscriptStore, make_gateway)
from .metrics import (LEVELS, DifficultyLevel, GapRecord, aggregate_ci, gap,
                      level_of)
from .paramspace import (CrossConstraint, ParamDomain, ParameterSpec,
                         UnprojectableConfig, feature_length, featurize,
                         perturb, project, sample_uniform, validate)
from .search import (EvalReport, SearchRun, CorruptLog, new_run, resume,
                     run_evaluation, run_search)
from .targets import (LlmTarget, OracleTarget, RolloutResult, SyntheticTarget,
                      evaluate, make_target, oracle_answer)

__version__ = "0.1.0"

__all__ = [
    "CrossConstraint", "ParamDomain", "ParameterSpec", "UnprojectableConfig",
    "feature_length", "featurize", "perturb", "project", "sample_uniform",
    "validate",
    "Environment", "env_names", "get_env",
    "ChatRequest", "ChatResponse", "HttpGateway", "RecordingGateway",
    "ReplayGateway", "TranscriptStore", "make_gateway",
    "LlmTarget", "OracleTarget", "RolloutResult", "SyntheticTarget",
    "evaluate", "make_target", "oracle_answer",
    "HistoryEntry", "PPRBuffer", "SurrogateModel", "bon_ml_select",
    "bon_tm_select", "llm_propose", "make_designer", "propose", "rs_ppr_step",
    "summarize_feedback", "train_surrogate",
    "LEVELS", "DifficultyLevel", "GapRecord", "aggregate_ci", "gap", "level_of",
    "EvalReport", "SearchRun", "CorruptLog", "new_run", "resume",
    "run_evaluation", "run_search",
    "__version__",
]
