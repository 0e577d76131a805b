from setuptools import setup


setup(
    name="relcoef",
    version="0.1.0",
    packages=["relcoef", "relcoef.data"],
    package_data={"relcoef": ["data/*.rel"]},
    entry_points={"console_scripts": ["relcoef = relcoef.cli:main"]},
    description="Coefficients of relation between events, and their bounds "
    "under probabilistic constraints.",
    python_requires=">=3.7",
    install_requires=["numpy", "pandas", "scipy", "tqdm"],
    extras_require={"test": ["pytest"]},
    license="MIT",
    zip_safe=False,
)
