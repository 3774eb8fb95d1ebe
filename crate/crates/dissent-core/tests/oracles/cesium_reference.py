"""Reference values for tests/cesium.rs.

Independent of the Rust implementation: dipole matrix elements follow Steck's
convention <F m|e r_q|F' m'> ∝ (-1)^(F'+J+1+I) sqrt((2F'+1)(2J+1))
{J J' 1; F' F I} <F m|F' 1 m' q>, evaluated exactly with sympy.

Run with: python3 cesium_reference.py
"""
from sympy import Rational as R, sqrt, nsimplify
from sympy.physics.wigner import wigner_6j, clebsch_gordan

I = R(7, 2)
J = R(1, 2)
GROUND = {3: -5170.855370625, 4: 4021.776399375}
D2 = {2: -339.7128, 3: -188.4885, 4: 12.79851, 5: 263.8906}
D1 = {3: -656.820, 4: 510.860}


def element(f, m, jp, fp, mp):
    """<F m| e r_q |F' m'> with q = m - m', up to the reduced element."""
    six = wigner_6j(J, jp, 1, fp, f, I)
    cg = clebsch_gordan(fp, 1, f, mp, m - mp, m)
    return (-1) ** (fp + J + 1 + I) * sqrt((2 * fp + 1) * (2 * J + 1)) * six * cg


def raman_rate(a, b, delta, ref, comps, jp=R(3, 2), excited=D2):
    """Sum over light components q (weights w) and scattered photon q_s of
    |sum_F' c_a c_b / Delta_F'|^2; overall constants dropped."""
    (fa, ma), (fb, mb) = a, b
    e_ref = excited[ref[1]] - GROUND[ref[0]]
    total = 0.0
    for q, w in comps:
        mp = ma + q
        qs = mp - mb
        if abs(qs) > 1:
            continue
        amp = 0.0
        for fp, e in excited.items():
            if abs(mp) > fp:
                continue
            # Absorption from a and emission into b; the phases (-1)^q are
            # common to every path and drop out of |amp|^2.
            ca = element(fa, ma, jp, fp, mp)
            cb = element(fb, mb, jp, fp, mp)
            c = float(ca * cb)
            if c == 0.0:
                continue
            d = delta + e_ref - (e - GROUND[fa])
            amp += c / d
        total += w * amp * amp
    return total


def z_value(delta, ref, comps):
    a = raman_rate((4, 4), (4, 3), delta, ref, comps)
    b = raman_rate((4, 3), (4, 4), delta, ref, comps)
    lo, hi = min(a, b), max(a, b)
    s = (lo / hi) ** 0.5
    return ((1 + s) / (1 - s)) ** 0.5


TRANSVERSE = [(-1, 0.5), (1, 0.5)]
PI = [(0, 1.0)]

if __name__ == "__main__":
    print("z_blue_transverse", repr(z_value(700.0, (4, 5), TRANSVERSE)))
    print("z_red_parallel", repr(z_value(-700.0, (4, 2), PI)))
    desired = raman_rate((4, 4), (4, 3), 700.0, (4, 5), TRANSVERSE)
    print("ratio_4_2", repr(raman_rate((4, 4), (4, 2), 700.0, (4, 5), TRANSVERSE) / desired))
    print("ratio_3_2", repr(raman_rate((4, 4), (3, 2), 700.0, (4, 5), TRANSVERSE) / desired))
    # Decay branching of D2 |F'=4, m'=2> into F = 3 and F = 4, summed over sublevels.
    tot = {
        f: sum(element(f, m, R(3, 2), 4, 2) ** 2 for m in range(-f, f + 1) if abs(m - 2) <= 1) for f in (3, 4)
    }
    for f in (3, 4):
        print(f"d2_branch_4_to_{f}", nsimplify(tot[f] / (tot[3] + tot[4])))
