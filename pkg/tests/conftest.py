import os

# every e-graph built during tests verifies congruence closure and the
# analysis fixpoint after each rebuild
os.environ.setdefault("SGES_AUDIT", "1")
