"""Physical constants (SI) and silicon material data."""

EPS0 = 8.8541878128e-12  # F/m
Q = 1.602176634e-19  # C
KB = 1.380649e-23  # J/K

EPS_SI = 11.7
EPS_SIO2 = 3.9
NI_SI = 1.0e16  # m^-3, 300 K
EG_SI = 1.12  # eV
CHI_SI = 4.05  # eV
# work function of intrinsic silicon; metal offsets are measured against it
PHI_INTRINSIC = CHI_SI + EG_SI / 2


def thermal_voltage(T: float) -> float:
    return KB * T / Q
