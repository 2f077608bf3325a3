"""Knowledge-attentive sequence classification at desk scale.

Subpackages: a numpy autodiff core (tensor, optim, gradcheck), word-level
text encoding, the multi-head knowledge attention model and its baselines,
task data handling plus a synthetic suite with planted decisive rules, a
trainer with grid search / transfer / seed averaging, knowledge perturbation
and attention inspection analyses, and a CLI tying them together.
"""

__version__ = "0.1.0"
