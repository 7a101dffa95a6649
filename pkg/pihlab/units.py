"""Units and their display.

Lengths are millimeters, forces newtons, moments newton-millimeters and time
seconds everywhere in pihlab. Nothing converts between systems; this module
only fixes the conventions and formats values for humans.
"""

__all__ = (
    "MM", "N",
    "DEFAULT_DT",
    "format_length",
    "format_force",
    "format_ratio",
    "format_duration",
    "ticks_for",
)


MM = "mm"
N = "N"

# 50 Hz control tick, so a 1 s analysis window is 50 ticks
DEFAULT_DT = 0.02


def format_length(value_mm, precision=3):
    return "{value:.{prec}f} {unit}".format(value=value_mm, prec=precision, unit=MM)


def format_force(value_n, precision=3):
    return "{value:.{prec}f} {unit}".format(value=value_n, prec=precision, unit=N)


def format_ratio(value, precision=4):
    if value is None:
        return "-"
    return "{value:.{prec}f}".format(value=value, prec=precision)


def format_duration(seconds, seconds_precision=0):
    floor_mins, mod_secs = divmod(seconds, 60)
    floor_hrs,  mod_mins = divmod(floor_mins, 60)

    units = [ ]

    if seconds >= 3600:
        units.append((floor_hrs, 0, "h"))

    if seconds >= 60:
        units.append((mod_mins, 0, "m"))

    units.append((mod_secs, seconds_precision, "s"))

    return " ".join(
        "{value:.{prec}f}{suffix}".format(value=v, prec=p, suffix=s)
        for v, p, s in units
    )


def ticks_for(seconds, dt):
    """Whole number of control ticks spanning `seconds`. Rounds rather than
    truncates, so 1.0 s at 0.02 s/tick is 50 and not 49."""
    return max(1, int(round(seconds / dt)))
