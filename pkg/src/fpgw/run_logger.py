import csv
import os
from datetime import datetime

HEADER = ['Timestamp', 'Event', 'Command', 'Details']


class RunLogger:
    """Appends one CSV row per CLI event to a daily run log."""

    def __init__(self, log_dir='logs'):
        os.makedirs(log_dir, exist_ok=True)
        # one file per day
        log_filename = f"fpgw_runs_{datetime.now().strftime('%Y-%m-%d')}.csv"
        self.log_path = os.path.join(log_dir, log_filename)

        if not os.path.exists(self.log_path):
            with open(self.log_path, 'w', newline='') as f:
                csv.writer(f).writerow(HEADER)

    def log_event(self, event_type, command="N/A", details=""):
        """Log an event such as RUN_START, RUN_DONE or RUN_FAILED.

        Args:
            event_type (str): Event name.
            command (str): CLI subcommand the event belongs to.
            details (str): Free-form key=value summary.
        """
        timestamp = datetime.now().strftime('%Y-%m-%d %H:%M:%S')
        with open(self.log_path, 'a', newline='') as f:
            csv.writer(f).writerow([timestamp, event_type, command, details])
