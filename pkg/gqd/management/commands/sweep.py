from gqd.management.commands._study import StudyCommand


class Command(StudyCommand):
    help = "Discord correlations along a field range, one series per angle and size."
    mode = "sweep"

    def add_mode_arguments(self, parser):
        parser.add_argument(
            "--h-range",
            nargs=3,
            type=float,
            metavar=("MIN", "MAX", "STEP"),
            help="field grid, inclusive of both ends",
        )

    def report(self, envelope):
        for document in envelope.payload["series"]:
            summary = document["summary"]
            maximum = summary["second_order_point"] or {}
            self.stdout.write(
                f"{document['name']}: rightmost sudden change at "
                f"{summary['first_order_boundary']}, pair-sum maximum at {maximum.get('h_max')}"
            )
