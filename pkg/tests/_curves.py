"""Helpers to build ScanCurve fixtures directly from cost values."""

from tauscan.metrics import CostTriple, ScanCurve, ScanEntry


def entry_from_chi2_np(t2, t1, value, p=1, status="ok", chi2_lambda=None):
    n = t2 - t1 + 1
    cost = CostTriple(chi2=value * (n - p), chi2_np=value, n=n, p=p)
    return ScanEntry(t1=t1, window_len=n, cost=cost, status=status,
                     chi2_lambda=chi2_lambda)


def curve_from_chi2_np(t2, values, t1_start=None, p=1, statuses=None):
    """Curve with consecutive t1, carrying the given chi2_np values."""
    n = len(values)
    if t1_start is None:
        t1_start = t2 - n - p
    entries = []
    for i, v in enumerate(values):
        status = statuses[i] if statuses is not None else "ok"
        if status == "failed":
            t1 = t1_start + i
            entries.append(ScanEntry(t1=t1, window_len=t2 - t1 + 1, cost=None,
                                     status="failed"))
        else:
            entries.append(entry_from_chi2_np(t2, t1_start + i, v, p=p, status=status))
    return ScanCurve(t2=t2, entries=tuple(entries))
