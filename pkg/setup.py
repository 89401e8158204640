from setuptools import find_packages, setup


def requirements():
    with open("requirements.txt", encoding="utf8") as f:
        return [line.strip() for line in f if line.strip() and not line.startswith("#")]


setup(
    name="subgauss-lab",
    version="0.1.0",
    description="Numerical lab for strictly subgaussian laws and the CLT in Renyi divergence of infinite order",
    packages=find_packages(exclude=["tests"]),
    python_requires=">=3.8",
    install_requires=requirements(),
    entry_points={"console_scripts": ["subgauss-lab=subgauss.cli:main"]},
)
