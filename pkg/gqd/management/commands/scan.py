from gqd.management.commands._study import StudyCommand


class Command(StudyCommand):
    help = "Phase-diagram estimates of both transitions for several angles and sizes."
    mode = "scan"

    def add_mode_arguments(self, parser):
        parser.add_argument(
            "--h-range",
            nargs=3,
            type=float,
            metavar=("MIN", "MAX", "STEP"),
            help="field grid, inclusive of both ends",
        )

    def report(self, envelope):
        for row in envelope.payload["rows"]:
            self.stdout.write(
                f"theta={row['theta_deg']} gamma={row['gamma']} L={row['L']}: "
                f"first order {row['h_first_order']} (circle {row['h_factorizing']}), "
                f"second order {row['h_second_order']}, dD/dh peak {row['h_derivative_peak']}"
            )
