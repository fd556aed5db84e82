"""
This file lists the ensemble modes and language tags available in codemix.
We keep it lightweight (no numpy import) so these variables can be accessed quickly.

Example:
    ```python
        import codemix
        print(codemix.available_ensemble_modes)
        print(codemix.available_lang_tags)
    ```

When adding a new ensemble combination rule:
- Update `available_ensemble_modes` here.
- Handle it in `codemix.common.models.ensemble.combine`.
"""

from codemix.__version__ import __version__  # noqa: F401

available_ensemble_modes = [
    "product",
    "weighted_average",
]

available_lang_tags = [
    "lang1",
    "lang2",
    "other",
]
