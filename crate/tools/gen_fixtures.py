#!/usr/bin/env python3
"""Regenerate the built-in molecule fixtures under crates/core/fixtures/.

Geometries are idealized (standard bond lengths and angles), not optimized
structures. Modes are bond-stretch local modes: each bonded pair moves
antiparallel along the bond with mass-weighted amplitudes so the centre of
mass stays fixed. The output is committed; tests pin its checksums.
"""
import math
import os
import sys

MASS = {"H": 1.0080, "C": 12.011, "N": 14.007, "O": 15.999, "Cl": 35.45}
# stretch force constants, mdyn/A
K = {
    frozenset(["C", "H"]): 4.9,
    frozenset(["N", "H"]): 6.4,
    frozenset(["C", "N"]): 5.3,
    frozenset(["C", "C"]): 4.5,
    frozenset(["C", "O"]): 11.8,
    frozenset(["C", "Cl"]): 3.4,
}
AROMATIC_CC = 7.6


def add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def scale(a, s):
    return tuple(x * s for x in a)


def norm(a):
    return math.sqrt(sum(x * x for x in a))


def unit(a):
    return scale(a, 1.0 / norm(a))


def cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def rot_z(v, ang):
    c, s = math.cos(ang), math.sin(ang)
    return (c * v[0] - s * v[1], s * v[0] + c * v[1], v[2])


class Mol:
    def __init__(self, name):
        self.name = name
        self.atoms = []
        self.bonds = []

    def atom(self, el, pos, bonded_to=None, k=None):
        self.atoms.append((el, pos))
        idx = len(self.atoms) - 1
        if bonded_to is not None:
            self.bonds.append((bonded_to, idx, k))
        return idx

    def bond(self, i, j, k=None):
        self.bonds.append((i, j, k))

    def pos(self, i):
        return self.atoms[i][1]

    def xyz(self):
        lines = [str(len(self.atoms)), self.name]
        for el, p in self.atoms:
            lines.append("%-2s %.6f %.6f %.6f" % (el, p[0], p[1], p[2]))
        return "\n".join(lines) + "\n"

    def modes(self):
        n = len(self.atoms)
        out = ["# bond-stretch local modes for %s" % self.name, "MODES %d %d" % (len(self.bonds), n)]
        for idx, (i, j, k) in enumerate(self.bonds, start=1):
            ei, pi = self.atoms[i]
            ej, pj = self.atoms[j]
            mi, mj = MASS[ei], MASS[ej]
            if k is None:
                k = K[frozenset([ei, ej])]
            mu = mi * mj / (mi + mj)
            freq = 1302.79 * math.sqrt(k / mu)
            u = unit(sub(pj, pi))
            disp = [(0.0, 0.0, 0.0)] * n
            disp[i] = scale(u, -mj / (mi + mj))
            disp[j] = scale(u, mi / (mi + mj))
            nrm = math.sqrt(sum(norm(d) ** 2 for d in disp))
            disp = [scale(d, 1.0 / nrm) for d in disp]
            out.append("MODE %d %.4f %.4f %.4f" % (idx, freq, mu, k))
            for d in disp:
                out.append("%.4f %.4f %.4f" % d)
        return "\n".join(out) + "\n"


def benzene_core(m, radius=1.39):
    ring = []
    for t in range(6):
        ang = math.radians(60 * t)
        ring.append(m.atom("C", (radius * math.cos(ang), radius * math.sin(ang), 0.0)))
    for t in range(6):
        m.bond(ring[t], ring[(t + 1) % 6], AROMATIC_CC)
    return ring


def radial(m, c_idx, dist):
    p = m.pos(c_idx)
    return add(p, scale(unit((p[0], p[1], 0.0)), dist))


def in_plane_pair(m, center_idx, from_idx, dist, half_angle_deg, tilt=0.0):
    """Two positions around center, splayed +-half_angle from the from->center axis."""
    c = m.pos(center_idx)
    axis = unit(sub(c, m.pos(from_idx)))
    a = math.radians(half_angle_deg)
    p1 = rot_z(axis, a)
    p2 = rot_z(axis, -a)
    return add(c, scale(add(p1, (0, 0, tilt)), dist)), add(c, scale(add(p2, (0, 0, -tilt)), dist))


def amino(m, c_idx):
    n = m.atom("N", radial(m, c_idx, 1.40), c_idx)
    h1, h2 = in_plane_pair(m, n, c_idx, 1.01, 60.0, tilt=0.15)
    m.atom("H", h1, n)
    m.atom("H", h2, n)


def acyl_chloride(m, c_idx):
    c = m.atom("C", radial(m, c_idx, 1.49), c_idx)
    o, cl = in_plane_pair(m, c, c_idx, 1.0, 60.0)
    o = add(m.pos(c), scale(unit(sub(o, m.pos(c))), 1.19))
    cl = add(m.pos(c), scale(unit(sub(cl, m.pos(c))), 1.79))
    m.atom("O", o, c)
    m.atom("Cl", cl, c)


def ring_h(m, c_idx):
    m.atom("H", radial(m, c_idx, 1.08), c_idx)


def mpd():
    m = Mol("m-phenylenediamine")
    r = benzene_core(m)
    for t in range(6):
        if t in (0, 2):
            amino(m, r[t])
        else:
            ring_h(m, r[t])
    return m


def tmc():
    m = Mol("trimesoyl chloride")
    r = benzene_core(m)
    for t in range(6):
        if t % 2 == 0:
            acyl_chloride(m, r[t])
        else:
            ring_h(m, r[t])
    return m


def tpc():
    m = Mol("terephthaloyl chloride")
    r = benzene_core(m)
    for t in range(6):
        if t in (0, 3):
            acyl_chloride(m, r[t])
        else:
            ring_h(m, r[t])
    return m


def tetra_h(m, center, axis, count, dist, perp):
    """Hydrogens on an sp3 centre: split symmetrically about `axis` in the `perp` plane."""
    axis = unit(axis)
    perp = unit(perp)
    other = unit(cross(axis, perp))
    out = []
    c = m.pos(center)
    if count == 1:
        out.append(add(c, scale(axis, dist)))
    else:
        for t in range(count):
            ang = 2 * math.pi * t / count
            d = add(scale(axis, math.cos(math.radians(70.5))),
                    scale(add(scale(perp, math.cos(ang)), scale(other, math.sin(ang))),
                          math.sin(math.radians(70.5))))
            out.append(add(c, scale(unit(d), dist)))
    for p in out:
        m.atom("H", p, center)


def piperazine():
    m = Mol("piperazine")
    ring = []
    for t in range(6):
        ang = math.radians(60 * t)
        z = 0.25 if t % 2 == 0 else -0.25
        el = "N" if t in (0, 3) else "C"
        ring.append(m.atom(el, (1.45 * math.cos(ang), 1.45 * math.sin(ang), z)))
    for t in range(6):
        m.bond(ring[t], ring[(t + 1) % 6])
    for t in range(6):
        p = m.pos(ring[t])
        out = unit((p[0], p[1], 0.0))
        up = (0.0, 0.0, 1.0 if p[2] > 0 else -1.0)
        if m.atoms[ring[t]][0] == "N":
            m.atom("H", add(p, scale(unit(add(out, scale(up, 0.3))), 1.01)), ring[t])
        else:
            m.atom("H", add(p, scale(up, 1.09)), ring[t])
            m.atom("H", add(p, scale(unit(add(out, scale(up, -0.33))), 1.09)), ring[t])
    return m


def zigzag(n, bond=1.53, angle=112.0):
    half = math.radians(angle / 2)
    dx = bond * math.sin(half)
    dy = bond * math.cos(half)
    return [(i * dx - (n - 1) * dx / 2, (dy / 2 if i % 2 == 0 else -dy / 2), 0.0) for i in range(n)]


def chain_h(m, idx, n_h, bond, backbone_y):
    p = m.pos(idx)
    outward = (0.0, 1.0 if p[1] > backbone_y else -1.0, 0.0)
    if n_h == 2:
        for s in (1.0, -1.0):
            d = unit(add(scale(outward, 0.6), (0.0, 0.0, s)))
            m.atom("H", add(p, scale(d, bond)), idx)
    elif n_h == 3:
        tetra_h(m, idx, add(outward, (-1.0 if p[0] < 0 else 1.0, 0.0, 0.0)), 3, bond, (0.0, 0.0, 1.0))


def eda():
    m = Mol("ethylenediamine")
    pts = zigzag(4, bond=1.50)
    els = ["N", "C", "C", "N"]
    idx = [m.atom(e, p) for e, p in zip(els, pts)]
    for a, b in zip(idx, idx[1:]):
        m.bond(a, b)
    for i, e in zip(idx, els):
        chain_h(m, i, 2, 1.01 if e == "N" else 1.09, 0.0)
    return m


def octadecanal():
    m = Mol("octadecanal")
    pts = zigzag(18)
    idx = [m.atom("C", p) for p in pts]
    for a, b in zip(idx, idx[1:]):
        m.bond(a, b)
    # C1 is the aldehyde carbon: C=O and one H in plane
    c1 = idx[0]
    p = m.pos(c1)
    o_dir = unit((-0.5, 0.8660 if p[1] > 0 else -0.8660, 0.0))
    m.atom("O", add(p, scale(o_dir, 1.21)), c1)
    m.atom("H", add(p, scale(unit((-1.0, -0.6 if p[1] > 0 else 0.6, 0.0)), 1.10)), c1)
    for i in idx[1:-1]:
        chain_h(m, i, 2, 1.09, 0.0)
    chain_h(m, idx[-1], 3, 1.09, 0.0)
    return m


def write(dirpath, stem, m, modes_text=None):
    with open(os.path.join(dirpath, stem + ".xyz"), "w") as f:
        f.write(m.xyz())
    with open(os.path.join(dirpath, stem + ".modes"), "w") as f:
        f.write(modes_text if modes_text is not None else m.modes())


def diatomic():
    m = Mol("dinitrogen")
    m.atom("N", (0.0, 0.0, 0.5488))
    m.atom("N", (0.0, 0.0, -0.5488))
    modes = "\n".join([
        "# N2 stretch",
        "MODES 1 2",
        "MODE 1 2358.5700 7.0034 22.9500",
        "0.0000 0.0000 0.7071",
        "0.0000 0.0000 -0.7071",
    ]) + "\n"
    return m, modes


def water():
    m = Mol("water")
    m.atom("O", (0.0, 0.0, 0.1173))
    m.atom("H", (0.0, 0.7572, -0.4692))
    m.atom("H", (0.0, -0.7572, -0.4692))
    modes = "\n".join([
        "# water normal modes: bend, symmetric stretch, antisymmetric stretch",
        "MODES 3 3",
        "MODE 1 1594.6000 1.0823 1.6223",
        "0.0000 0.0000 0.0700",
        "0.0000 -0.4300 -0.5600",
        "0.0000 0.4300 -0.5600",
        "",
        "MODE 2 3656.7000 1.0453 8.2377",
        "0.0000 0.0000 -0.0500",
        "0.0000 0.5800 0.4000",
        "0.0000 -0.5800 0.4000",
        "",
        "MODE 3 3755.9000 1.0820 8.9923",
        "0.0000 0.0700 0.0000",
        "0.0000 -0.5600 0.4300",
        "0.0000 -0.5600 -0.4300",
    ]) + "\n"
    return m, modes


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "crates", "core", "fixtures")
    os.makedirs(out, exist_ok=True)
    m, modes = diatomic()
    write(out, "dinitrogen", m, modes)
    m, modes = water()
    write(out, "water", m, modes)
    write(out, "mpd", mpd())
    write(out, "piperazine", piperazine())
    write(out, "eda", eda())
    write(out, "tmc", tmc())
    write(out, "tpc", tpc())
    write(out, "octadecanal", octadecanal())


if __name__ == "__main__":
    main()
