"""Aggregation of experiment artifacts for the htype-lab application."""

import json
import logging
from pathlib import Path

import pandas as pd

from ...modelling.errors import ConfigInvalid
from ..utils.constants import REPORT_CSV, REPORT_MARKDOWN
from ..utils.helpers import artifact_metadata, write_csv

logger = logging.getLogger(__name__)


def _load_summaries(outdir: Path) -> list[tuple[str, dict]]:
    summaries = []
    for path in sorted(Path(outdir).glob("*.json")):
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            logger.warning("skipping unreadable artifact %s", path)
            continue
        if isinstance(payload, dict) and "metadata" in payload and "result" in payload:
            summaries.append((path.stem, payload))
    return summaries


def _passed(result: dict):
    acceptance = result.get("acceptance")
    if not acceptance:
        return None
    return all(acceptance.values())


def summary_frame(summaries: list[tuple[str, dict]]) -> pd.DataFrame:
    rows = [
        {
            "artifact": name,
            "command": payload["metadata"].get("command"),
            "config_hash": payload["metadata"].get("config_hash"),
            "passed": _passed(payload["result"]),
        }
        for name, payload in summaries
    ]
    return pd.DataFrame(rows, columns=["artifact", "command", "config_hash", "passed"])


def render_markdown(summaries: list[tuple[str, dict]]) -> str:
    lines = ["# htype-lab report", ""]
    for name, payload in summaries:
        metadata, result = payload["metadata"], payload["result"]
        passed = _passed(result)
        status = "n/a" if passed is None else "passed" if passed else "FAILED"
        lines.append(f"## {name} ({metadata.get('command')}): {status}")
        lines.append("")
        lines.append(f"- config hash: `{metadata.get('config_hash')}`")
        for key, value in result.items():
            if isinstance(value, (str, int, float, bool)) or value is None:
                lines.append(f"- {key}: {value}")
        for key, value in (result.get("acceptance") or {}).items():
            lines.append(f"- acceptance {key}: {value}")
        lines.append("")
    return "\n".join(lines)


def run_report(config: dict, outdir: Path) -> dict:
    """Write report.md and report.csv from every JSON summary in the output directory."""
    summaries = _load_summaries(outdir)
    if not summaries:
        raise ConfigInvalid("outdir", f"no experiment artifacts found in {outdir}")
    frame = summary_frame(summaries)
    (Path(outdir) / REPORT_MARKDOWN).write_text(render_markdown(summaries), encoding="utf-8")
    write_csv(outdir, Path(REPORT_CSV).stem, frame, artifact_metadata("report", config))
    failed = frame["passed"].eq(False).sum()
    return {"artifacts": len(summaries), "failed": int(failed)}
