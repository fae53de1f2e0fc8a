"""One-step abductive multi-target learning lab.

The package couples a small propositional proof checker (the reasoning that
licenses target abduction), an image-processing pipeline that abduces training
targets from loose polygon annotations, multi-target loss machinery with the
closed-form identities that make the joint loss cheap, noisy-label baseline
losses, and the logical assessment metrics used to score predictions against
abduced targets when clean labels do not exist.
"""

__version__ = "0.1.0"
