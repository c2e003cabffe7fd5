from gqd.management.commands._study import StudyCommand


class Command(StudyCommand):
    help = "Finite-size scaling fit of critical fields read from sweep JSON files."
    mode = "fit"

    def add_mode_arguments(self, parser):
        parser.add_argument("inputs", nargs="*", help="sweep JSON files, one per size")

    def report(self, envelope):
        payload = envelope.payload
        self.stdout.write(
            f"h_c(L) = {payload['amplitude']} * exp(-L / {payload['decay_length']}) "
            f"+ {payload['asymptote']}  (rms {payload['rms_residual']})"
        )
