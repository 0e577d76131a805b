"""
Example programs shipped with the package, addressable on the command line
as "@name" (e.g. ``relcoef solve @transmission``).
"""
import os


def _file_or_fn(name):
    try:
        from importlib.resources import files
    except ImportError:
        return os.path.join(os.path.dirname(__file__), name)
    return str(files("relcoef.data").joinpath(name))


def example_names():
    here = os.path.dirname(_file_or_fn("__init__.py"))
    return sorted(fn[:-4] for fn in os.listdir(here) if fn.endswith(".rel"))


def example_text(name):
    fn = _file_or_fn(f"{name}.rel")
    if not os.path.exists(fn):
        raise ValueError(
            f"no packaged example {name!r}; have {', '.join(example_names())}"
        )
    with open(fn, encoding="utf-8") as f:
        return f.read()
