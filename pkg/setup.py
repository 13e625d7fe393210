from setuptools import setup, find_packages

setup(
    name="stap-codesign",
    version="0.1",
    package_dir={"": "src"},
    packages=find_packages("src"),
    package_data={"stap_codesign": ["data/*.json", "data/*.conf"]},
    install_requires=[
        "setuptools<81",
        "numpy>=1.22",
        "scipy>=1.8",
        "tqdm",
    ],
    entry_points={
        "console_scripts": [
            "stap-codesign=stap_codesign.cli:main",
        ],
    },

    # metadata to display on PyPI
    description="Joint STAP receive filter and waveform design by alternating minimization",
    author="jpquiroga",
    author_email="jpquiroga@gmail.com",

)
