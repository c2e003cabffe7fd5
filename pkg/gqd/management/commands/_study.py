from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from gqd.exceptions import DomainError, GQDError
from gqd.forms import RunConfigForm, load_config_file
from gqd.runner import run

USAGE_ERROR = 2
RUN_ERROR = 1

FORM_OPTIONS = (
    "theta_deg",
    "gamma",
    "coupling",
    "h",
    "h_range",
    "sizes",
    "starts",
    "seed",
    "max_evals",
    "simplex_tolerance",
    "out",
    "format",
    "wrap_pair",
    "inputs",
)


def describe_errors(errors):
    return "; ".join(
        f"{field}: {' '.join(messages)}" for field, messages in errors.items()
    )


class StudyCommand(BaseCommand):
    """Shared options and error handling of the study subcommands."""

    mode = None

    def add_arguments(self, parser):
        parser.add_argument("--config", help="JSON config file; flags override it")
        parser.add_argument(
            "--theta-deg", help="angles in degrees, gamma = sin(theta); e.g. 15,30,45"
        )
        parser.add_argument("--gamma", type=float, help="raw anisotropy, instead of --theta-deg")
        parser.add_argument("--coupling", type=float, help="exchange coupling J (default 1)")
        parser.add_argument("--sizes", help="chain sizes, e.g. 3,4,5 or 3-10")
        parser.add_argument("--starts", type=int, help="optimizer starts per discord")
        parser.add_argument("--seed", type=int, help="seed of the random optimizer starts")
        parser.add_argument("--max-evals", type=int, help="objective evaluations per start")
        parser.add_argument("--simplex-tolerance", type=float, help="simplex size at convergence")
        parser.add_argument("--out", help="output directory")
        parser.add_argument("--format", help="csv, json or csv,json")
        parser.add_argument(
            "--wrap-pair",
            action="store_true",
            default=None,
            help="include the periodic pair (L-1, 0) in the nearest-neighbour sum",
        )
        parser.add_argument("--force", action="store_true", help="recompute cached results")
        parser.add_argument("--workers", type=int, help="size of the worker pool")
        self.add_mode_arguments(parser)

    def add_mode_arguments(self, parser):
        pass

    def build_config(self, options):
        data = {}
        if options.get("config"):
            try:
                data.update(load_config_file(options["config"]))
            except ValidationError as exc:
                raise CommandError(" ".join(exc.messages), returncode=USAGE_ERROR)
        if data.get("mode", self.mode) != self.mode:
            raise CommandError(
                f"mode: config file is for {data['mode']!r}, not {self.mode!r}",
                returncode=USAGE_ERROR,
            )
        for name in FORM_OPTIONS:
            if options.get(name) not in (None, []):
                data[name] = options[name]
        data["mode"] = self.mode

        form = RunConfigForm(data)
        if not form.is_valid():
            raise CommandError(describe_errors(form.errors), returncode=USAGE_ERROR)
        try:
            return form.to_run_config()
        except ValidationError as exc:
            raise CommandError(" ".join(exc.messages), returncode=USAGE_ERROR)

    def handle(self, *args, **options):
        config = self.build_config(options)
        workers = options.get("workers") or settings.GQD["WORKERS"]
        if workers < 1:
            raise CommandError("workers: must be at least 1", returncode=USAGE_ERROR)

        try:
            envelope = run(config, workers=workers, force=options["force"])
        except DomainError as exc:
            raise CommandError(str(exc), returncode=USAGE_ERROR)
        except GQDError as exc:
            raise CommandError(f"computation failed: {exc}", returncode=RUN_ERROR)
        except OSError as exc:
            raise CommandError(f"cannot write results: {exc}", returncode=RUN_ERROR)

        if envelope.cached:
            self.stdout.write(f"Up to date: {envelope.directory} (use --force to recompute)")
        else:
            self.stdout.write(
                self.style.SUCCESS(
                    f"Wrote {len(envelope.files)} file(s) to {envelope.directory} "
                    f"in {envelope.wall_time:.1f}s"
                )
            )
        self.report(envelope)

    def report(self, envelope):
        pass
