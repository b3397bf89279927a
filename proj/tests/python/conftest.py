import importlib
import os
import sys

ext_dir = os.environ.get("HUDA_EXT_DIR")
pkg_dir = os.environ.get("HUDA_PKG_DIR")
if ext_dir and ext_dir not in sys.path:
    sys.path.insert(0, ext_dir)
if pkg_dir and pkg_dir not in sys.path:
    sys.path.insert(0, pkg_dir)
if ext_dir:
    # map the build-tree extension onto the package layout
    core = importlib.import_module("_core")
    sys.modules.setdefault("huda._core", core)
