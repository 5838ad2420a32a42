"""Shared pytest wiring.

After a run that touched the release checklist (test_acceptance.py), print
one verdict line per checklist item so the pass/fail state of every
published claim is visible at a glance.
"""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    seen = set()
    for status, mark in (("passed", "PASS"), ("failed", "FAIL"),
                         ("error", "FAIL")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::" not in nodeid or nodeid in seen:
                continue
            seen.add(nodeid)
            rows.append((nodeid.split("::")[-1], mark))
    if not rows:
        return
    mod = sys.modules.get("test_acceptance")
    details = getattr(mod, "CHECKLIST", {}) if mod else {}
    terminalreporter.section("release checklist")
    for name, mark in rows:
        extra = details.get(name, "")
        line = f"{mark}  {name}"
        if extra:
            line += f"  [{extra}]"
        terminalreporter.write_line(line)
