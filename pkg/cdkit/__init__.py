"""
Counterdiabatic Driving Toolkit

Gate-based counterdiabatic (CD) driving for interpolating Hamiltonians:
regularised gauge potentials, their quadrature discretisation, the
Trotter-Suzuki product formula that compiles them into gates, an adiabatic
(AQC) baseline and a randomised qDRIFT-style variant.

Submodules are imported explicitly (``from cdkit.cd import run_cd``).
"""

__version__ = "0.1.0"
