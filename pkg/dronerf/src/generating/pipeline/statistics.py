"""
Statistics tracking for dataset generation.

Tracks window counts per class and split without affecting generation logic.
"""

from collections import Counter
from datetime import datetime


class GenerationStats:
    """
    Track statistics throughout a generation run.

    Separates metrics tracking from execution logic.
    """

    def __init__(self):
        self.start_time = datetime.now()
        self.end_time = None

        self.windows_per_class = Counter()
        self.windows_per_split = Counter()
        self.windows_per_snr = Counter()
        self.files_written = 0
        self.files_rejected = 0

        self.errors = []

    def record_dataset(self, dataset):
        """Record every item of a built or loaded dataset."""
        for item in dataset.items:
            self.windows_per_class[item.label] += 1
            self.windows_per_split[item.split] += 1
            self.windows_per_snr[item.snr_db] += 1
        for rejection in getattr(dataset, "rejections", []):
            self.record_rejected(f"{rejection['file']}: {rejection['reason']}")

    def record_written(self, count):
        self.files_written += count

    def record_rejected(self, error_msg):
        self.files_rejected += 1
        self.errors.append(error_msg)

    def record_error(self, error_msg):
        """Add an error message to the error log."""
        self.errors.append(error_msg)

    def finish(self):
        self.end_time = datetime.now()

    def get_duration_seconds(self):
        end = self.end_time or datetime.now()
        return (end - self.start_time).total_seconds()

    def print_summary(self):
        """Print a clean summary report."""
        total = sum(self.windows_per_class.values())

        print("\n" + "=" * 70)
        print("GENERATION SUMMARY")
        print("=" * 70)
        print(f"Duration: {self.get_duration_seconds():.1f}s")
        print(f"Windows: {total}")
        print(f"Files written: {self.files_written}")

        print("\nPer class:")
        for label, count in sorted(self.windows_per_class.items()):
            print(f"  {label:<12} {count}")

        print("\nPer split:")
        for split, count in sorted(self.windows_per_split.items()):
            print(f"  {split:<12} {count}")

        if self.windows_per_snr:
            cells = sorted(self.windows_per_snr.items())
            print(f"\nSNR grid: {cells[0][0]:g} .. {cells[-1][0]:g} dB ({len(cells)} points)")

        if self.errors:
            print(f"\nErrors ({len(self.errors)}):")
            for error in self.errors[:10]:
                print(f"  - {error}")
            if len(self.errors) > 10:
                print(f"  ... and {len(self.errors) - 10} more")
        else:
            print("\nNo errors!")

        print("=" * 70 + "\n")
