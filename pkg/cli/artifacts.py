"""CSV and JSON emission for one run; files are tracked so a failed run leaves nothing behind."""
import csv
import json
import logging
import numbers

from .config import json_safe

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '.17g'
SUMMARY_NAME = 'summary.json'


def format_cell(value):
    """Integers as written, floats with 17 significant digits."""
    if isinstance(value, (bool, str)) or value is None:
        return '' if value is None else str(value)
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return format(float(value), FLOAT_FORMAT)
    return str(value)


class RunArtifacts:
    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.written = []

    def _path(self, name):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        self.written.append(path)
        return path

    def write_csv(self, name, header, rows):
        path = self._path(name)
        with open(path, 'w', newline='', encoding='utf-8') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(header)
            count = 0
            for row in rows:
                writer.writerow([format_cell(value) for value in row])
                count += 1
        logger.info("wrote %s (%d rows)", path, count)
        return path

    def write_summary(self, summary):
        path = self._path(SUMMARY_NAME)
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(json_safe(summary), fh, indent=2, allow_nan=False)
            fh.write('\n')
        logger.info("wrote %s", path)
        return path

    def discard(self):
        """Remove every file written so far."""
        for path in self.written:
            path.unlink(missing_ok=True)
        if self.written:
            logger.warning("removed %d partial output files from %s", len(self.written), self.out_dir)
        self.written = []
