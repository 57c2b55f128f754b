"""impcat: a guarded-command language over finite relational, partial and
probabilistic semantics, with triple checking and a rule-soundness harness."""

__version__ = "0.1.0"
