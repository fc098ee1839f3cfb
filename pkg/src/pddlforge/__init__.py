"""pddlforge: typed-STRIPS domain synthesis with symbolic feedback.

Library layout:

- :mod:`pddlforge.core` — domains, problems, well-formedness
- :mod:`pddlforge.text` — PDDL parsing and canonical printing
- :mod:`pddlforge.semantics` — grounding, transition, plan validation
- :mod:`pddlforge.planner` — top-k plan enumeration
- :mod:`pddlforge.landmarks` — disjunctive action landmark extraction
- :mod:`pddlforge.hde` — domain equivalence scoring
- :mod:`pddlforge.backends` — generation backends and the repair loop
- :mod:`pddlforge.construction` — initial domain construction
- :mod:`pddlforge.feedback` — feedback message pools and selection
- :mod:`pddlforge.search` — random-walk and best-first refinement
- :mod:`pddlforge.dataset` / :mod:`pddlforge.cli` — assets, grids, reports
"""

__version__ = "0.1.0"
