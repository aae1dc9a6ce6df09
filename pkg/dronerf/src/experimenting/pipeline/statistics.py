"""
Statistics tracking for experiment runs.
"""

from datetime import datetime


class ExperimentStats:
    """
    Track stage timings, written artefacts and errors of one experiment.

    Separates metrics tracking from execution logic.
    """

    def __init__(self, run_id):
        self.run_id = run_id
        self.start_time = datetime.now()
        self.end_time = None

        self.stage_seconds = {}
        self.outputs = []
        self.failed_stage = None

        self.errors = []

    def record_stage(self, stage, seconds):
        self.stage_seconds[stage] = float(seconds)

    def record_output(self, path):
        self.outputs.append(str(path))

    def record_failure(self, stage, error_msg):
        self.failed_stage = stage
        self.record_error(f"[{stage}] {error_msg}")

    def record_error(self, error_msg):
        """Add an error message to the error log."""
        self.errors.append(error_msg)

    def finish(self):
        self.end_time = datetime.now()

    def get_duration_seconds(self):
        end = self.end_time or datetime.now()
        return (end - self.start_time).total_seconds()

    @property
    def status(self):
        return "failed" if self.failed_stage else "completed"

    def print_summary(self):
        """Print a clean summary report."""
        print("\n" + "=" * 70)
        print(f"EXPERIMENT SUMMARY ({self.run_id})")
        print("=" * 70)
        print(f"Status: {self.status}")
        print(f"Duration: {self.get_duration_seconds():.1f}s")

        if self.stage_seconds:
            print("\nStages:")
            for stage, seconds in self.stage_seconds.items():
                print(f"  {stage:<15} {seconds:>8.1f}s")

        print(f"\nArtefacts written: {len(self.outputs)}")

        if self.errors:
            print(f"\nErrors ({len(self.errors)}):")
            for error in self.errors[:10]:
                print(f"  - {error}")
            if len(self.errors) > 10:
                print(f"  ... and {len(self.errors) - 10} more")
        else:
            print("\nNo errors!")

        print("=" * 70 + "\n")
