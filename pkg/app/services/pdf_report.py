import io
import logging
from typing import List, Optional

import numpy as np
from reportlab.graphics.charts.lineplots import LinePlot
from reportlab.graphics.shapes import Drawing, String
from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import HRFlowable, Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from app.models import BatchSummary, QcLabel, QualityReport

logger = logging.getLogger(__name__)

GREEN = colors.HexColor("#16a34a")
AMBER = colors.HexColor("#d97706")
RED = colors.HexColor("#dc2626")
DARK = colors.HexColor("#1f2937")
GRAY = colors.HexColor("#6b7280")
LIGHT_GRAY = colors.HexColor("#e5e7eb")
WHITE = colors.white
BG_CARD = colors.HexColor("#f9fafb")

CURVE_COLORS = [
    colors.HexColor(c)
    for c in ("#0066ff", "#16a34a", "#d97706", "#dc2626", "#7c3aed", "#0891b2", "#be185d", "#4d7c0f")
]


def _get_styles():
    styles = getSampleStyleSheet()
    styles.add(ParagraphStyle("ReportTitle", parent=styles["Title"], fontSize=20, textColor=DARK, spaceAfter=4, fontName="Helvetica-Bold", alignment=TA_CENTER))
    styles.add(ParagraphStyle("ReportSubtitle", parent=styles["Normal"], fontSize=10, textColor=GRAY, spaceAfter=16, alignment=TA_CENTER))
    styles.add(ParagraphStyle("SectionHeader", parent=styles["Heading2"], fontSize=13, textColor=DARK, spaceBefore=14, spaceAfter=8, fontName="Helvetica-Bold"))
    styles.add(ParagraphStyle("BodyText2", parent=styles["Normal"], fontSize=10, textColor=DARK, leading=15, spaceAfter=6))
    return styles


def _safe(text: str) -> str:
    if not text:
        return ""
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _label_color(label: QcLabel):
    return {QcLabel.GOOD: GREEN, QcLabel.OK: AMBER, QcLabel.BAD: RED}.get(label, GRAY)


def _table_style() -> TableStyle:
    return TableStyle([
        ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
        ("FONTSIZE", (0, 0), (-1, -1), 8),
        ("BACKGROUND", (0, 0), (-1, 0), DARK),
        ("TEXTCOLOR", (0, 0), (-1, 0), WHITE),
        ("TEXTCOLOR", (0, 1), (-1, -1), DARK),
        ("ROWBACKGROUNDS", (0, 1), (-1, -1), [WHITE, BG_CARD]),
        ("BOTTOMPADDING", (0, 0), (-1, -1), 5),
        ("TOPPADDING", (0, 0), (-1, -1), 5),
        ("BOX", (0, 0), (-1, -1), 0.5, LIGHT_GRAY),
        ("LINEBELOW", (0, 0), (-1, -1), 0.5, LIGHT_GRAY),
        ("ALIGN", (1, 0), (-1, -1), "CENTER"),
    ])


def _recordings_table(reports: List[QualityReport]) -> Table:
    rows = [["Recording", "Label", "OHA", "THV", "CHV", "RBC", "PaLOSi", "Flag"]]
    for r in reports:
        t = r.temporal
        rows.append([
            r.recording_id, t.label.value,
            f"{t.oha:.3f}", f"{t.thv:.3f}", f"{t.chv:.3f}", f"{t.rbc:.3f}",
            f"{r.palosi.global_index:.4f}", "yes" if r.palosi.flag else "",
        ])
    table = Table(rows, colWidths=[1.6 * inch] + [0.62 * inch] * 7, repeatRows=1)
    style = _table_style()
    for i, r in enumerate(reports, start=1):
        style.add("TEXTCOLOR", (1, i), (1, i), _label_color(r.temporal.label))
        if r.palosi.flag:
            style.add("TEXTCOLOR", (6, i), (7, i), RED)
    table.setStyle(style)
    return table


def _summary_table(summary: BatchSummary) -> Table:
    rows = [["Label", "Recordings", "PaLOSi > flag", "PaLOSi > 0.9"]]
    for label, counts in summary.crosstab.items():
        rows.append([
            label,
            str(sum(counts.values())),
            f"{summary.fraction_flagged_by_label[label]:.1%}",
            f"{summary.fraction_above_0_9_by_label[label]:.1%}",
        ])
    rows.append(["All", str(summary.n_processed), f"{summary.fraction_flagged:.1%}", f"{summary.fraction_above_0_9:.1%}"])
    table = Table(rows, colWidths=[1.5 * inch] * 4)
    table.setStyle(_table_style())
    return table


def log_spectra_chart(freqs: np.ndarray, log_power: np.ndarray, channels: List[str], width=460, height=220) -> Drawing:
    """Multichannel log10 power spectra; parallel curves are the visual signature of a high PaLOSi."""
    drawing = Drawing(width, height)
    plot = LinePlot()
    plot.x, plot.y = 45, 30
    plot.width, plot.height = width - 60, height - 50
    plot.data = [list(zip(freqs.tolist(), row.tolist())) for row in log_power]
    for i in range(len(plot.data)):
        plot.lines[i].strokeColor = CURVE_COLORS[i % len(CURVE_COLORS)]
        plot.lines[i].strokeWidth = 0.8
    plot.xValueAxis.valueMin = float(freqs.min())
    plot.xValueAxis.valueMax = float(freqs.max())
    plot.yValueAxis.labelTextFormat = "%.1f"
    drawing.add(plot)
    drawing.add(String(width / 2, 5, "Frequency (Hz)", fontSize=8, fillColor=GRAY, textAnchor="middle"))
    drawing.add(String(8, height / 2, "log10 PSD", fontSize=8, fillColor=GRAY))
    drawing.add(String(width - 10, height - 12, f"{len(channels)} channels", fontSize=8, fillColor=GRAY, textAnchor="end"))
    return drawing


def _footer(canvas, doc, title_text):
    canvas.saveState()
    canvas.setFont("Helvetica", 8)
    canvas.setFillColor(GRAY)
    canvas.drawString(doc.leftMargin, doc.height + doc.topMargin + 12, "palosi-qc")
    canvas.drawRightString(doc.width + doc.leftMargin, doc.height + doc.topMargin + 12, title_text)
    canvas.setStrokeColor(LIGHT_GRAY)
    canvas.line(doc.leftMargin, doc.height + doc.topMargin + 8, doc.width + doc.leftMargin, doc.height + doc.topMargin + 8)
    canvas.drawRightString(doc.width + doc.leftMargin, 25, f"Page {doc.page}")
    canvas.restoreState()


def generate_qc_pdf(
    reports: List[QualityReport],
    summary: Optional[BatchSummary] = None,
    log_power: Optional[np.ndarray] = None,
    freqs: Optional[np.ndarray] = None,
) -> bytes:
    """QC summary PDF. The spectra chart is drawn only for a single recording."""
    buffer = io.BytesIO()
    styles = _get_styles()
    doc = SimpleDocTemplate(buffer, pagesize=A4, topMargin=0.8 * inch, bottomMargin=0.6 * inch, leftMargin=0.6 * inch, rightMargin=0.6 * inch)
    story = []

    title = "EEG Quality Control Report"
    story.append(Paragraph(title, styles["ReportTitle"]))
    subtitle = f"{len(reports)} recording(s)"
    if reports:
        cfg = reports[0].spectral_config
        subtitle += f" &middot; Welch {cfg.segment_seconds:g} s {cfg.window}, {cfg.f_min:g}-{cfg.f_max:g} Hz"
    story.append(Paragraph(subtitle, styles["ReportSubtitle"]))

    if summary is not None:
        story.append(Paragraph("Summary", styles["SectionHeader"]))
        story.append(_summary_table(summary))
        if summary.errors:
            story.append(Spacer(1, 6))
            story.append(Paragraph(f"{summary.n_failed} file(s) could not be processed:", styles["BodyText2"]))
            for err in summary.errors:
                story.append(Paragraph(f"<b>{_safe(err.recording_id)}</b>: {_safe(err.reason)}", styles["BodyText2"]))

    if reports:
        story.append(Paragraph("Recordings", styles["SectionHeader"]))
        story.append(_recordings_table(reports))

    if len(reports) == 1 and log_power is not None and freqs is not None:
        story.append(Paragraph("Log power spectra", styles["SectionHeader"]))
        story.append(log_spectra_chart(np.asarray(freqs), np.asarray(log_power), reports[0].channels))
        bands = ", ".join(f"{k} {v:.3f}" for k, v in reports[0].band_palosi.items())
        story.append(Paragraph(f"Band PaLOSi: {_safe(bands)}", styles["BodyText2"]))

    story.append(Spacer(1, 16))
    story.append(HRFlowable(width="100%", thickness=0.5, color=LIGHT_GRAY))

    def on_page(canvas, doc_ref):
        _footer(canvas, doc_ref, title)

    doc.build(story, onFirstPage=on_page, onLaterPages=on_page)
    logger.debug("Rendered QC PDF for %d recording(s)", len(reports))
    return buffer.getvalue()
