"""Pick the compiled tenant when it is importable, else the Python one.

Set ``HMDSIM_PURE=1`` to force the pure-Python path.
"""

import os

from ._pyengine import PyTenant

Tenant = PyTenant
hungarian_kernel = None
coalesce_sizes = None
NAME = "python"

if not os.environ.get("HMDSIM_PURE"):
    try:
        from ._kernel import CTenant, coalesce_sizes, hungarian_max
    except ImportError:  # extension not built
        pass
    else:
        Tenant = CTenant
        hungarian_kernel = hungarian_max
        NAME = "cython"
