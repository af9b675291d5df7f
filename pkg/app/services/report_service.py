import os
import json

import pandas as pd
from reportlab.lib.pagesizes import A4
from reportlab.pdfgen import canvas

from app.core.constants import REPORT_STORAGE_PATH
from app.core.logger import get_logger
from app.models.evaluation import EvalReport
from app.services.evaluation_service import OUTCOME_COLUMNS

logger = get_logger(__name__)


def report_payload(report: EvalReport) -> dict:
    """
    JSON view of the report. No timestamps, so identical runs give
    identical bytes.
    """
    payload = report.model_dump(mode="json")
    payload["accuracy"] = report.accuracy
    payload["total"] = report.overall.total
    for name, counts in report.per_category.items():
        payload["per_category"][name]["accuracy"] = counts.accuracy
        payload["per_category"][name]["total"] = counts.total
    return payload


def summary_frame(report: EvalReport) -> pd.DataFrame:
    rows = dict(report.per_category)
    rows["overall"] = report.overall
    frame = pd.DataFrame(
        [[getattr(counts, col) for col in OUTCOME_COLUMNS] for counts in rows.values()],
        index=list(rows),
        columns=OUTCOME_COLUMNS,
    )
    frame["total"] = frame[OUTCOME_COLUMNS].sum(axis=1)
    frame["accuracy"] = [f"{100 * counts.accuracy:.1f}%" for counts in rows.values()]
    return frame


def render_text_report(report: EvalReport) -> str:
    lines = [
        "Evaluation Report",
        f"backend: {report.backend}  seed: {report.seed}  scenes: {report.scene_count}  "
        f"queries: {report.overall.total}",
        "",
        summary_frame(report).to_string(),
        "",
        f"overall accuracy: {100 * report.accuracy:.1f}%",
    ]
    return "\n".join(lines) + "\n"


def default_report_dir(seed: int, backend: str) -> str:
    return os.path.join(REPORT_STORAGE_PATH, f"eval-{backend}-seed{seed}")


def write_report(report: EvalReport, out_dir: str | None = None, pdf: bool = False) -> dict:
    """
    Writes report.json, report.txt and records.jsonl, plus report.pdf
    when asked. Returns the written paths.
    """
    report_dir = out_dir or default_report_dir(report.seed, report.backend)
    os.makedirs(report_dir, exist_ok=True)

    # ---------- Save JSON ----------
    json_path = os.path.join(report_dir, "report.json")
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(report_payload(report), f, indent=2, sort_keys=True)
        f.write("\n")

    # ---------- Save text ----------
    text_path = os.path.join(report_dir, "report.txt")
    with open(text_path, "w", encoding="utf-8") as f:
        f.write(render_text_report(report))

    # ---------- Save records ----------
    records_path = os.path.join(report_dir, "records.jsonl")
    with open(records_path, "w", encoding="utf-8") as f:
        for record in report.records:
            f.write(json.dumps(record.model_dump(mode="json"), sort_keys=True))
            f.write("\n")

    paths = {"json_report": json_path, "text_report": text_path, "records": records_path}

    # ---------- Generate PDF ----------
    if pdf:
        pdf_path = os.path.join(report_dir, "report.pdf")
        _generate_pdf(report, pdf_path)
        paths["pdf_report"] = pdf_path

    logger.info("Wrote evaluation report to %s", report_dir)
    return paths


def _generate_pdf(report: EvalReport, output_path: str):
    """
    Internal helper to generate PDF report.
    """
    c = canvas.Canvas(output_path, pagesize=A4, invariant=1)
    width, height = A4

    y = height - 40

    def draw_line(text):
        nonlocal y
        c.drawString(40, y, text)
        y -= 18
        if y < 40:
            c.showPage()
            y = height - 40

    draw_line("Scene Query Evaluation Report")
    draw_line("-" * 60)

    draw_line(f"Backend: {report.backend}")
    draw_line(f"Seed: {report.seed}")
    draw_line(f"Scenes: {report.scene_count}")
    draw_line(f"Queries: {report.overall.total}")
    draw_line(f"Overall Accuracy: {100 * report.accuracy:.1f}%")

    draw_line("")
    draw_line("Per Category:")
    if report.per_category:
        for name, counts in report.per_category.items():
            draw_line(
                f"- {name}: {counts.correct}/{counts.total} correct, "
                f"{counts.incorrect} incorrect, {counts.ungrounded} ungrounded, "
                f"{counts.unparseable} unparseable"
            )
    else:
        draw_line("No queries evaluated.")

    failures = [r for r in report.records if r.outcome.value != "correct"]
    draw_line("")
    draw_line("First Failures:")
    if failures:
        for record in failures[:10]:
            draw_line(f"- [{record.outcome.value}] {record.query_text[:80]}")
    else:
        draw_line("None.")

    c.save()
