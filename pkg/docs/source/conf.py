#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# subwalk documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys
sys.path.insert(0, os.path.abspath('../..'))

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.doctest',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
]

templates_path = ['_templates']

source_suffix = {'.rst': 'restructuredtext'}

master_doc = 'index'

# General information about the project.
project = 'subwalk'
copyright = '2026, subwalk developers'
author = 'subwalk developers'

# The version info for the project you're documenting, acts as replacement for
# |version| and |release|.
_version_py = '../../subwalk/_version.py'
version_ns = {}
exec(compile(open(_version_py).read(), _version_py, 'exec'), version_ns)
# The short X.Y version.
version = '%i.%i' % version_ns['version_info'][:2]
# The full version, including alpha/beta/rc tags.
release = version_ns['__version__']

language = 'en'

exclude_patterns = []

pygments_style = 'sphinx'

todo_include_todos = False

# -- Options for HTML output ----------------------------------------------

html_theme = 'sphinx_rtd_theme'

htmlhelp_basename = 'subwalkdoc'

# -- Options for LaTeX output ---------------------------------------------

latex_documents = [
    (master_doc, 'subwalk.tex', 'subwalk Documentation',
     author, 'manual'),
]

man_pages = [
    (master_doc, 'subwalk', 'subwalk Documentation',
     [author], 1)
]

intersphinx_mapping = {'python': ('https://docs.python.org/3', None)}
