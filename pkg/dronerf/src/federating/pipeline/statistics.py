"""
Statistics tracking for federated runs.

Tracks per-round participation and rejections without affecting the
federation logic.
"""

from collections import Counter
from datetime import datetime


class RoundStats:
    """
    Track statistics throughout a federation.

    Separates metrics tracking from execution logic.
    """

    def __init__(self):
        self.start_time = datetime.now()
        self.end_time = None

        self.rounds = 0
        self.submissions = 0
        self.accepted = 0
        self.rejections = Counter()
        self.carried_forward = []
        self.last_metrics = {}

        self.errors = []

    def record_round(self, record):
        self.rounds += 1
        for client_id, verdict in record.verdicts.items():
            self.submissions += 1
            if verdict["accepted"]:
                self.accepted += 1
            else:
                self.rejections[verdict["reason"]] += 1
                self.errors.append(f"round {record.round_index} client {client_id}: {verdict['reason']}")
        if record.carried_forward:
            self.carried_forward.append(record.round_index)
        if record.metrics:
            self.last_metrics = dict(record.metrics)

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
        print("FEDERATION SUMMARY")
        print("=" * 70)
        print(f"Duration: {self.get_duration_seconds():.1f}s")
        print(f"Rounds: {self.rounds}")
        print(f"Submissions: {self.submissions} (accepted {self.accepted})")

        if self.rejections:
            print("\nRejections by reason:")
            for reason, count in sorted(self.rejections.items()):
                print(f"  {reason:<22} {count}")
        if self.carried_forward:
            print(f"\nRounds carried forward: {self.carried_forward}")

        if self.last_metrics:
            print("\nLast evaluation:")
            for name, value in self.last_metrics.items():
                print(f"  {name:<20} {value:.4f}")

        if self.errors:
            print(f"\nErrors ({len(self.errors)}):")
            for error in self.errors[:10]:
                print(f"  - {error}")
            if len(self.errors) > 10:
                print(f"  ... and {len(self.errors) - 10} more")
        else:
            print("\nNo errors!")

        print("=" * 70 + "\n")
