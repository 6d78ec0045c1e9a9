"""groundctl: grounded browser-test-script generation and evaluation.

Documentation and page HTML are chunked and embedded into a vector
store; retrieval pulls both textual requirements and DOM structure into
a constrained prompt; generated scripts target a restricted action DSL
whose locators resolve against a static DOM index; and a simulator plus
evaluation harness measure syntax validity, element resolution, and
execution success across generator arms.
"""

__version__ = "0.1.0"
