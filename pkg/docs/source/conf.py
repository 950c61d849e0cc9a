"""Sphinx configuration for the exmart documentation."""

import pathlib
import sys

# import exmart from the checkout rather than an installed copy
sys.path.insert(0, pathlib.Path(__file__).parents[2].resolve().as_posix())

project = "exmart"
copyright = "2026, exmart developers"
author = "exmart developers"
release = "0.1.0a1"

extensions = [
    "myst_parser",
    "numpydoc",
    "sphinxcontrib.mermaid",
    "sphinx.ext.autodoc",
    "sphinx.ext.autosectionlabel",
    "sphinx.ext.autosummary",
    "sphinx.ext.intersphinx",
]
autosummary_generate = True
autodoc_member_order = "bysource"
autosectionlabel_prefix_document = True
myst_fence_as_directive = ["mermaid"]
numpydoc_show_class_members = False

intersphinx_mapping = {
    "numpy": ("https://numpy.org/doc/stable/", None),
    "pandas": ("https://pandas.pydata.org/docs/", None),
    "python": ("https://docs.python.org/3", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
    "sklearn": ("https://scikit-learn.org/stable/", None),
}

exclude_patterns = ["_autosummary/*.tmp"]
source_suffix = {".md": "markdown", ".rst": "restructuredtext"}

html_theme = "sphinx_rtd_theme"
html_title = "exmart"
