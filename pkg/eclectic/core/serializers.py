try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

from django.conf import settings
from rest_framework import serializers

from .choices import (
    ActivationKind,
    MarginalFamily,
    ObjectiveTag,
    Policy,
    SimilarityKind,
)
from .exceptions import ConfigError
from .models import PathResult, RunManifest
from .objectives import ObjectiveKind
from .scenarios import REGISTRY

# ==========================================
# 1. RUN CONFIGURATION SECTIONS
# ==========================================


def _validate_objective(label):
    # a bare quantile objective expands over objectives.quantile_levels
    if label in (ObjectiveTag.MIN_VAR, ObjectiveTag.MIN_ES):
        return label
    try:
        ObjectiveKind.parse(label)
    except ValueError as exc:
        raise serializers.ValidationError(str(exc))
    return label


def _validate_model(label):
    if label not in REGISTRY:
        raise serializers.ValidationError(f"unknown generative model {label!r}")
    return label


class DataSerializer(serializers.Serializer):
    prices = serializers.CharField(default="demo_prices.csv")
    step = serializers.IntegerField(min_value=1, default=settings.REBALANCE_STEP_DAYS)


class MarginalsSerializer(serializers.Serializer):
    families = serializers.ListField(
        child=serializers.ChoiceField(choices=MarginalFamily.choices),
        allow_empty=False,
        default=[f.value for f in MarginalFamily if f != MarginalFamily.EMPIRICAL],
    )

    def validate_families(self, value):
        if MarginalFamily.EMPIRICAL in value:
            raise serializers.ValidationError("empirical marginals are chosen by the model label, not listed here")
        return value


class CopulaSerializer(serializers.Serializer):
    include_joe = serializers.BooleanField(default=True)


class ScenariosSerializer(serializers.Serializer):
    n = serializers.IntegerField(min_value=100, default=settings.N_SCENARIOS)


class ObjectivesSerializer(serializers.Serializer):
    transaction_cost = serializers.FloatField(min_value=0.0, default=settings.TRANSACTION_COST)
    quantile_levels = serializers.ListField(
        child=serializers.FloatField(min_value=0.0, max_value=1.0),
        default=list(settings.QUANTILE_LEVELS),
    )
    classical_bl = serializers.BooleanField(default=False)


class OptimizerSerializer(serializers.Serializer):
    box_multiplier = serializers.FloatField(min_value=1.0, default=settings.BOX_MULTIPLIER)


class ArmSerializer(serializers.Serializer):
    model = serializers.CharField(validators=[_validate_model])
    objective = serializers.CharField(validators=[_validate_objective])
    v = serializers.FloatField(min_value=0.0, default=1.0)


class BacktestSerializer(serializers.Serializer):
    fit_window_steps = serializers.IntegerField(min_value=1, default=settings.FIT_WINDOW_STEPS)
    seeds = serializers.ListField(child=serializers.IntegerField(min_value=0), default=[0], allow_empty=False)
    arms = ArmSerializer(many=True, required=False)
    models = serializers.ListField(child=serializers.CharField(validators=[_validate_model]), required=False)
    objectives = serializers.ListField(
        child=serializers.CharField(validators=[_validate_objective]), required=False
    )
    cost_aversions = serializers.ListField(
        child=serializers.FloatField(min_value=0.0), default=list(settings.COST_AVERSIONS)
    )

    def validate(self, attrs):
        has_grid = "models" in attrs or "objectives" in attrs
        if attrs.get("arms") and has_grid:
            raise serializers.ValidationError("give either an arm list or a models x objectives grid, not both")
        if not attrs.get("arms"):
            if not (attrs.get("models") and attrs.get("objectives")):
                raise serializers.ValidationError({"arms": "no arms configured"})
            attrs["arms"] = [
                {"model": m, "objective": o, "v": v}
                for m in attrs["models"]
                for o in attrs["objectives"]
                for v in attrs["cost_aversions"]
            ]
        attrs.pop("models", None)
        attrs.pop("objectives", None)
        return attrs


class BanditSerializer(serializers.Serializer):
    blend_window_steps = serializers.IntegerField(min_value=2, default=settings.BLEND_WINDOW_STEPS)
    similarities = serializers.ListField(
        child=serializers.ChoiceField(choices=SimilarityKind.choices),
        default=[SimilarityKind.COSINE.value],
    )
    activations = serializers.ListField(
        child=serializers.ChoiceField(choices=ActivationKind.choices),
        default=[ActivationKind.LOGIT.value],
    )
    decays = serializers.ListField(
        child=serializers.FloatField(min_value=0.0, max_value=1.0),
        default=list(settings.DECAY_FACTORS),
    )
    policies = serializers.ListField(
        child=serializers.ChoiceField(choices=Policy.choices),
        default=[p.value for p in Policy],
    )
    leaky_relu = serializers.ChoiceField(choices=["verbatim", "conventional"], default="verbatim")

    def validate_decays(self, value):
        bad = [g for g in value if not 0.0 < g < 1.0]
        if bad:
            raise serializers.ValidationError(f"decay factors must lie strictly inside (0, 1): {bad}")
        return value


class AttributionSerializer(serializers.Serializer):
    folds = serializers.IntegerField(min_value=2, default=settings.CV_FOLDS)
    cv_seed = serializers.IntegerField(min_value=0, default=settings.CV_SEED)
    grid_size = serializers.IntegerField(min_value=1, default=settings.LASSO_GRID_SIZE)
    grid_ratio = serializers.FloatField(min_value=0.0, max_value=1.0, default=settings.LASSO_GRID_RATIO)
    penalize_intercept = serializers.BooleanField(default=False)


class ReportSerializer(serializers.Serializer):
    tau_window = serializers.IntegerField(min_value=10, default=settings.FIT_WINDOW_STEPS)


SECTIONS = {
    "data": DataSerializer,
    "marginals": MarginalsSerializer,
    "copula": CopulaSerializer,
    "scenarios": ScenariosSerializer,
    "objectives": ObjectivesSerializer,
    "optimizer": OptimizerSerializer,
    "backtest": BacktestSerializer,
    "bandit": BanditSerializer,
    "attribution": AttributionSerializer,
    "report": ReportSerializer,
}


def validate_config(raw: dict) -> dict:
    """Validate every section, collecting all errors before raising."""
    errors = {}
    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        errors["config"] = [f"unknown section(s): {', '.join(unknown)}"]
    validated = {}
    for name, serializer_class in SECTIONS.items():
        section = raw.get(name, {})
        if not isinstance(section, dict):
            errors[name] = ["must be a table"]
            continue
        serializer = serializer_class(data=section)
        if serializer.is_valid():
            validated[name] = _plain(serializer.validated_data)
        else:
            errors[name] = serializer.errors
    if errors:
        raise ConfigError(_plain(errors))
    return validated


def load_config(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError({"config": [f"file not found: {path}"]}) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError({"config": [f"{path}: {exc}"]}) from None
    return validate_config(raw)


def prices_path(config: dict, config_path) -> Path:
    """Price file of a run; relative paths are taken from the config file's directory."""
    prices = Path(config["data"]["prices"])
    return prices if prices.is_absolute() else (Path(config_path).parent / prices).resolve()


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return str(value) if isinstance(value, serializers.ErrorDetail) else value


# ==========================================
# 2. RUN REGISTRY
# ==========================================


class PathResultSerializer(serializers.ModelSerializer):
    class Meta:
        model = PathResult
        fields = (
            "job_key",
            "label",
            "seed",
            "csv_path",
            "steps",
            "terminal_wealth",
            "flagged_steps",
        )


class RunManifestSerializer(serializers.ModelSerializer):
    paths = PathResultSerializer(many=True, read_only=True)

    class Meta:
        model = RunManifest
        fields = (
            "command",
            "config_hash",
            "seeds",
            "tool_version",
            "input_ids",
            "outputs",
            "status",
            "started_at",
            "finished_at",
            "paths",
        )
