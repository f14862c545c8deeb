"""Model-comparison report table, matching the published averages layout."""

import io
import csv

from .errors import EmptyInput

ROWS = (
    ("Pixel Accuracy Average", "pixel_accuracy"),
    ("Mean IoU Average", "mean_iou"),
    ("Mean Accuracy Average", "mean_accuracy"),
    ("Frequency Weighted IoU Average", "fw_iou"),
)


def render_report(summaries, model_names):
    """Four-row text table, one column per model, percentages to 2 decimals.

    ``summaries`` maps model name -> DatasetSummary (metrics as fractions).
    """
    if not model_names:
        raise EmptyInput("no models to report")
    label_w = max(len(r[0]) for r in ROWS)
    col_w = [max(len(n), 6) for n in model_names]
    lines = [" " * label_w + "  " +
             "  ".join(n.rjust(w) for n, w in zip(model_names, col_w))]
    for title, attr in ROWS:
        cells = []
        for name, w in zip(model_names, col_w):
            value = getattr(summaries[name], attr) * 100.0
            cells.append(f"{value:.2f}".rjust(w))
        lines.append(title.ljust(label_w) + "  " + "  ".join(cells))
    return "\n".join(lines) + "\n"


def report_csv(summaries, model_names):
    if not model_names:
        raise EmptyInput("no models to report")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric"] + list(model_names))
    for title, attr in ROWS:
        writer.writerow([title] + [f"{getattr(summaries[n], attr) * 100.0:.2f}"
                                   for n in model_names])
    return buf.getvalue()
