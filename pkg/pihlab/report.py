"""Plain-text report over a run's output directory."""
import json
import os

from pihlab.errors import ModelFormatError
from pihlab.learning._common import AXES, FEATURE_NAMES
from pihlab.units import format_force, format_length, format_ratio


__all__ = (
    "OUTPUT_FILES",
    "ReportFormatter",
    "load_outputs",
    "render_report",
)


OUTPUT_FILES = {
    "convergence": "convergence.json",
    "evaluation": "evaluation.json",
    "importance": "importance.json",
    "summary": "summary.json",
}

MODES = ("full", "reduced")


def load_outputs(out_dir):
    """Whichever result files exist in `out_dir`, keyed like OUTPUT_FILES."""
    outputs = { }
    for key, name in OUTPUT_FILES.items():
        path = os.path.join(out_dir, name)
        if not os.path.exists(path):
            continue
        with open(path, "r") as stream:
            try:
                outputs[key] = json.load(stream)
            except json.JSONDecodeError as error:
                raise ModelFormatError("result file is not JSON", path=path, line=error.lineno)
    return outputs


class ReportFormatter(object):
    def __init__(self, column_width=10):
        self._width = column_width

    def _row(self, cells):
        first, rest = cells[0], cells[1:]
        return "%-12s%s" % (first, "".join("%*s" % (self._width, c) for c in rest))

    def format_convergence(self, data):
        yield "Convergence"
        yield "  controller:        %s" % data.get("controller")
        yield "  episodes:          %d" % data.get("n_episodes", 0)
        window = data.get("ensemble_window")
        if window is None:
            yield "  ensemble:          not converged"
        else:
            yield "  ensemble:          window %d (%.1f s)" % (window, data.get("ensemble_time_s", 0.0))
        if data.get("steady_fz") is not None:
            yield "  steady fz:         %s" % format_force(data["steady_fz"])
        yield ""

    def format_table(self, title, rows, value_key, controllers):
        yield title
        header = [ "" ] + [
            "%s/%s" % (controller[:3], mode[:3])
            for controller in controllers for mode in MODES
        ]
        yield self._row(header)
        lookup = {(r["axis"], r["controller"], r["feature_mode"]): r[value_key] for r in rows}
        for axis in AXES:
            cells = [ axis.upper() ]
            for controller in controllers:
                for mode in MODES:
                    cells.append(format_ratio(lookup.get((axis, controller, mode))))
            yield self._row(cells)
        yield ""

    def format_evaluation(self, data):
        rows = data.get("rows", [ ])
        controllers = sorted(set(r["controller"] for r in rows))
        yield from self.format_table("Direction accuracy (higher is better)", rows, "accuracy", controllers)
        yield from self.format_table("Offset RMSE [mm] (lower is better)", rows, "rmse", controllers)
        if data.get("regression_direction"):
            yield from self.format_table(
                "Direction accuracy of the offset regressor", data["regression_direction"], "accuracy", controllers,
            )
        for controller, n in sorted(data.get("skipped", {}).items()):
            yield "Skipped %s: %d records" % (controller, n)

    def format_importance(self, data):
        for axis in AXES:
            entry = data.get(axis)
            if entry is None:
                continue
            yield "Feature importance, %s direction" % axis.upper()
            names = entry.get("features", FEATURE_NAMES)
            for name, mean, std in zip(names, entry["mean"], entry["std"]):
                yield "  %-4s %s +/- %s" % (name, format_ratio(mean), format_ratio(std))
            yield ""

    def format_summary(self, data):
        yield "Insertion"
        yield "  controller:        %s" % data.get("controller")
        yield "  trials:            %d" % data["n_trials"]
        yield "  success rate:      %s" % format_ratio(data["success_rate"], 2)
        yield "  mean corrections:  %s" % format_ratio(data.get("mean_corrections"), 2)
        failures = { }
        for trial in data.get("trials", [ ]):
            if not trial["success"]:
                failures[trial["reason"]] = failures.get(trial["reason"], 0) + 1
        for reason in sorted(failures):
            yield "  failed (%s): %d" % (reason, failures[reason])
        offsets = [
            max(abs(v) for v in trial["final_offset"])
            for trial in data.get("trials", [ ]) if trial["success"]
        ]
        if offsets:
            yield "  worst final offset: %s" % format_length(max(offsets))
        yield ""


def render_report(out_dir, formatter=None):
    """Report lines for every result file found in `out_dir`. An empty
    directory gives a single explanatory line."""
    formatter = formatter or ReportFormatter()
    outputs = load_outputs(out_dir)
    if not outputs:
        return [ "No results in %s" % out_dir ]

    lines = [ ]
    if "convergence" in outputs:
        lines.extend(formatter.format_convergence(outputs["convergence"]))
    if "evaluation" in outputs:
        lines.extend(formatter.format_evaluation(outputs["evaluation"]))
    if "importance" in outputs:
        lines.extend(formatter.format_importance(outputs["importance"]))
    if "summary" in outputs:
        lines.extend(formatter.format_summary(outputs["summary"]))
    return lines
