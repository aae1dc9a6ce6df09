"""
Statistics tracking for training runs.
"""

from datetime import datetime


class TrainingStats:
    """
    Track per-epoch losses of one training run.

    Separates metrics tracking from execution logic.
    """

    def __init__(self, label="centralized"):
        self.label = label
        self.start_time = datetime.now()
        self.end_time = None

        self.epoch_losses = []
        self.train_samples = 0

        self.errors = []

    def record_samples(self, count):
        self.train_samples = int(count)

    def record_epoch(self, epoch, loss):
        self.epoch_losses.append((int(epoch), float(loss)))

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
        print("\n" + "=" * 70)
        print(f"TRAINING SUMMARY ({self.label})")
        print("=" * 70)
        print(f"Duration: {self.get_duration_seconds():.1f}s")
        print(f"Training samples: {self.train_samples}")
        print(f"Epochs: {len(self.epoch_losses)}")

        if self.epoch_losses:
            first, last = self.epoch_losses[0][1], self.epoch_losses[-1][1]
            print(f"Loss: {first:.4f} -> {last:.4f}")

        if self.errors:
            print(f"\nErrors ({len(self.errors)}):")
            for error in self.errors[:10]:
                print(f"  - {error}")
            if len(self.errors) > 10:
                print(f"  ... and {len(self.errors) - 10} more")
        else:
            print("\nNo errors!")

        print("=" * 70 + "\n")
