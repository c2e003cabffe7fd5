import json
import re
from pathlib import Path

from django import forms
from django.conf import settings
from django.core.exceptions import ValidationError

from gqd.exceptions import DomainError
from gqd.gqd_engine import OptimizerConfig
from gqd.runner import FORMATS, MODES, SUDDEN_CHANGE_KEYS, RunConfig
from gqd.spin_model import MAX_SITES, MIN_SITES

SIZE_RANGE = re.compile(r"^\s*(\d+)\s*-\s*(\d+)\s*$")


class ListField(forms.Field):
    """Accepts a list or a comma/space separated string."""

    def to_python(self, value):
        if value in self.empty_values:
            return []
        if isinstance(value, (list, tuple)):
            return [str(item).strip() for item in value if str(item).strip()]
        return [item for item in re.split(r"[,\s]+", str(value).strip()) if item]


def parse_floats(items, label):
    try:
        return [float(item) for item in items]
    except ValueError:
        raise ValidationError(f"{label} must be numbers.")


def check_sizes(items):
    if len(items) == 1 and SIZE_RANGE.match(items[0]):
        first, last = (int(value) for value in SIZE_RANGE.match(items[0]).groups())
        sizes = list(range(first, last + 1))
    else:
        try:
            sizes = [int(item) for item in items]
        except ValueError:
            raise ValidationError("Sizes must be integers or a range such as 3-10.")
    if not sizes:
        raise ValidationError("At least one size is required.")
    if any(not MIN_SITES <= size <= MAX_SITES for size in sizes):
        raise ValidationError(f"Sizes must lie within [{MIN_SITES}, {MAX_SITES}].")
    if len(set(sizes)) != len(sizes):
        raise ValidationError("Sizes must not repeat.")
    return sizes


class RunConfigForm(forms.Form):
    mode = forms.ChoiceField(choices=[(mode, mode) for mode in MODES])
    theta_deg = ListField(required=False)
    gamma = forms.FloatField(required=False, min_value=0.0, max_value=1.0)
    coupling = forms.FloatField(required=False)
    h = forms.FloatField(required=False, min_value=0.0)
    h_range = ListField(required=False)
    sizes = ListField(required=False)
    starts = forms.IntegerField(required=False, min_value=1)
    seed = forms.IntegerField(required=False, min_value=0)
    max_evals = forms.IntegerField(required=False, min_value=1)
    simplex_tolerance = forms.FloatField(required=False)
    out = forms.CharField(required=False)
    format = ListField(required=False)
    wrap_pair = forms.BooleanField(required=False)
    inputs = ListField(required=False)
    degeneracy_tolerance = forms.FloatField(required=False)
    sudden_change = forms.JSONField(required=False)

    def clean_theta_deg(self):
        thetas = parse_floats(self.cleaned_data["theta_deg"], "Angles")
        if any(not 0.0 <= theta <= 90.0 for theta in thetas):
            raise ValidationError("Angles must lie within [0, 90] degrees.")
        return thetas

    def clean_h_range(self):
        values = parse_floats(self.cleaned_data["h_range"], "The h range")
        if not values:
            return None
        if len(values) != 3:
            raise ValidationError("The h range needs exactly MIN MAX STEP.")
        low, high, step = values
        if low < 0 or high < low:
            raise ValidationError("The h range needs 0 <= MIN <= MAX.")
        if step <= 0:
            raise ValidationError("The h range step must be positive.")
        return values

    def clean_sizes(self):
        items = self.cleaned_data["sizes"]
        if not items:
            return []
        return check_sizes(items)

    def clean_simplex_tolerance(self):
        tolerance = self.cleaned_data["simplex_tolerance"]
        if tolerance is not None and tolerance <= 0:
            raise ValidationError("The simplex tolerance must be positive.")
        return tolerance

    def clean_degeneracy_tolerance(self):
        tolerance = self.cleaned_data["degeneracy_tolerance"]
        if tolerance is not None and tolerance <= 0:
            raise ValidationError("The degeneracy tolerance must be positive.")
        return tolerance

    def clean_sudden_change(self):
        thresholds = self.cleaned_data["sudden_change"]
        if thresholds in (None, ""):
            return {}
        if not isinstance(thresholds, dict):
            raise ValidationError("Sudden-change thresholds must be an object.")
        unknown = sorted(set(thresholds) - set(SUDDEN_CHANGE_KEYS))
        if unknown:
            raise ValidationError(f"Unknown sudden-change keys: {', '.join(unknown)}.")
        if any(
            isinstance(value, bool) or not isinstance(value, (int, float))
            for value in thresholds.values()
        ):
            raise ValidationError("Sudden-change thresholds must be numbers.")
        return {name: float(value) for name, value in thresholds.items()}

    def clean_format(self):
        formats = [item.lower() for item in self.cleaned_data["format"]]
        unknown = sorted(set(formats) - set(FORMATS))
        if unknown:
            raise ValidationError(f"Unknown formats: {', '.join(unknown)}.")
        return formats

    def clean_inputs(self):
        paths = self.cleaned_data["inputs"]
        missing = [path for path in paths if not Path(path).is_file()]
        if missing:
            raise ValidationError(f"Input files not found: {', '.join(missing)}.")
        return paths

    def clean(self):
        cleaned_data = super().clean()
        mode = cleaned_data.get("mode")
        thetas = cleaned_data.get("theta_deg")
        gamma = cleaned_data.get("gamma")

        if thetas and gamma is not None:
            self.add_error("gamma", "Give either theta_deg or gamma, not both.")
        if mode in ("point", "sweep", "scan") and not thetas and gamma is None:
            if "theta_deg" not in self.errors and "gamma" not in self.errors:
                self.add_error("theta_deg", "Either theta_deg or gamma is required.")

        if mode in ("point", "sweep", "scan") and not cleaned_data.get("sizes"):
            if "sizes" not in self.errors:
                self.add_error("sizes", "At least one size is required.")

        if mode == "point":
            if cleaned_data.get("h") is None:
                self.add_error("h", "Point mode needs a scalar h.")
            if cleaned_data.get("h_range"):
                self.add_error("h_range", "Point mode takes a scalar h, not a range.")
            if thetas and len(thetas) > 1:
                self.add_error("theta_deg", "Point mode takes a single angle.")
            if cleaned_data.get("sizes") and len(cleaned_data["sizes"]) > 1:
                self.add_error("sizes", "Point mode takes a single size.")
        elif mode in ("sweep", "scan"):
            if cleaned_data.get("h") is not None:
                self.add_error("h", f"{mode.capitalize()} mode takes an h range, not a scalar h.")
        elif mode == "fit":
            if len(cleaned_data.get("inputs") or []) < 4 and "inputs" not in self.errors:
                self.add_error("inputs", "A scaling fit needs at least four series files.")

        return cleaned_data

    def to_run_config(self):
        data = self.cleaned_data
        defaults = settings.GQD
        optimizer = dict(defaults["OPTIMIZER"])
        for name in ("starts", "seed", "max_evals", "simplex_tolerance"):
            if data.get(name) is not None:
                optimizer[name] = data[name]
        h_range = data.get("h_range")
        if data["mode"] in ("sweep", "scan") and not h_range:
            h_range = list(defaults["H_RANGE"])
        try:
            return RunConfig(
                mode=data["mode"],
                sizes=tuple(data.get("sizes") or ()),
                theta_degrees=tuple(data.get("theta_deg") or ()),
                gamma=data.get("gamma"),
                coupling=data["coupling"] if data.get("coupling") is not None else 1.0,
                h=data.get("h"),
                h_range=tuple(h_range) if h_range else None,
                optimizer=OptimizerConfig(**optimizer),
                output_dir=data.get("out") or str(defaults["OUTPUT_DIR"]),
                formats=tuple(data.get("format") or defaults["FORMATS"]),
                wrap_pair=bool(data.get("wrap_pair")),
                inputs=tuple(data.get("inputs") or ()),
                degeneracy_tolerance=(
                    data["degeneracy_tolerance"]
                    if data.get("degeneracy_tolerance") is not None
                    else defaults["DEGENERACY_TOLERANCE"]
                ),
                sudden_change={**defaults["SUDDEN_CHANGE"], **(data.get("sudden_change") or {})},
            )
        except DomainError as exc:
            raise ValidationError(str(exc))


CONFIG_FILE_SECTIONS = {
    "chain": {
        "theta_degrees": "theta_deg",
        "theta_deg": "theta_deg",
        "gamma": "gamma",
        "coupling": "coupling",
        "h": "h",
        "h_range": "h_range",
        "sizes": "sizes",
    },
    "optimizer": {
        "starts": "starts",
        "seed": "seed",
        "max_evals": "max_evals",
        "simplex_tolerance": "simplex_tolerance",
    },
    "output": {"dir": "out", "formats": "format"},
    "analysis": {
        "degeneracy_tolerance": "degeneracy_tolerance",
        "sudden_change": "sudden_change",
    },
}


def load_config_file(path):
    """Flatten a nested JSON config file into form data."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"Cannot read config file {path}: {exc}")
    if not isinstance(document, dict):
        raise ValidationError(f"Config file {path} must hold a JSON object.")

    data = {}
    for key, value in document.items():
        if key in CONFIG_FILE_SECTIONS:
            if not isinstance(value, dict):
                raise ValidationError(f"Config section {key!r} must be an object.")
            for name, item in value.items():
                if name not in CONFIG_FILE_SECTIONS[key]:
                    raise ValidationError(f"Unknown key {key}.{name} in config file.")
                if item is not None:
                    data[CONFIG_FILE_SECTIONS[key][name]] = item
        elif key in ("mode", "wrap_pair", "inputs"):
            data[key] = value
        else:
            raise ValidationError(f"Unknown key {key!r} in config file.")
    return data
