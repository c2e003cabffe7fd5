from gqd.management.commands._study import StudyCommand


class Command(StudyCommand):
    help = "Ground state and discord correlations of one chain at one field."
    mode = "point"

    def add_mode_arguments(self, parser):
        parser.add_argument("--h", type=float, help="transverse field")

    def report(self, envelope):
        payload = envelope.payload
        self.stdout.write(
            f"L={payload['num_sites']} gamma={payload['anisotropy']} h={payload['h']} "
            f"phase={payload['phase']} degenerate={payload['degenerate']}"
        )
        self.stdout.write(
            f"total={payload['total_gqd']} pair_sum={payload['nn_pair_sum']} "
            f"residual={payload['residual']}"
        )
