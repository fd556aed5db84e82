import platform

import numpy as np

from codemix import __version__ as version
from codemix.common.utils.import_utils import is_package_available

OPTIONAL_PACKAGES = ["einops", "omegaconf", "safetensors", "emoji", "tqdm", "termcolor", "wandb", "torch"]


def display_sys_info() -> dict:
    """Run this to get basic system info to help for tracking issues & bugs."""
    info = {
        "`codemix` version": version,
        "Platform": platform.platform(),
        "Python version": platform.python_version(),
        "Numpy version": np.__version__,
    }
    for pkg in OPTIONAL_PACKAGES:
        available, pkg_version = is_package_available(pkg, return_version=True)
        info[f"{pkg} version"] = pkg_version if available else "not installed"
    print("\nCopy-and-paste the text below in your GitHub issue.\n")
    print(format_dict(info))
    return info


def format_dict(d: dict) -> str:
    return "\n".join([f"- {prop}: {val}" for prop, val in d.items()]) + "\n"


if __name__ == "__main__":
    display_sys_info()
