import pandas as pd
from pathlib import Path
from typing import List, Sequence
from src.config.logger import logger
from src.utils.helpers import catch_exceptions, write_atomically
from src.utils.orchestrator import RESULT_COLUMNS, ResultRecord, table_to_csv


REPORT_FILENAME = "report.csv"


def load_records(paths: Sequence[Path]) -> List[ResultRecord]:
    """
    Reads result records; any unreadable file raises ValueError naming it.
    """
    records = []
    for path in paths:
        try:
            records.append(ResultRecord.from_json(Path(path).read_text(encoding="utf-8")))
        except (OSError, KeyError, TypeError) as e:
            raise ValueError(f"Cannot read result record '{path}' : {e}")
    return records


def summary_block(record: ResultRecord) -> str:
    """
    Human-readable block: one line per check plus its fitted slopes.
    """
    lines = [f"== {record.scenario} : {'pass' if record.passed else 'fail'}"]
    for check in record.checks:
        reason = f"  ({check.reason})" if check.reason else ""
        lines.append(f"  {check.name:<28} {check.status}{reason}")
        for key, fit in sorted(check.fits.items()):
            lines.append(f"      {key}: slope={fit['slope']:.4f} rms={fit['residual_rms']:.2e}")
    return "\n".join(lines)


@catch_exceptions
def emit_report(records: Sequence[ResultRecord], out_dir: Path) -> str:
    """
    Writes the combined table to <out_dir>/report.csv and returns the summary, scenarios in name order.
    """
    ordered = sorted(records, key=lambda r: r.scenario)
    tables = [r.table() for r in ordered]
    df = pd.concat(tables, ignore_index=True) if tables else pd.DataFrame(columns=RESULT_COLUMNS)
    path = Path(out_dir) / REPORT_FILENAME
    write_atomically(path, table_to_csv(df[RESULT_COLUMNS]))
    logger.info(f"Report of {len(ordered)} scenario(s) written to '{path}'")
    return "\n\n".join(summary_block(r) for r in ordered)
