"""Standard desk-scale presentations used across the tests and demos."""

from __future__ import annotations

from fractions import Fraction

from .foliation import Chart, FoliationPresentation, InvolutivityCertificate
from .poly import Polynomial, PolyVectorField, parse_polynomial


def full2() -> FoliationPresentation:
    """The full foliation of the plane, <d/dx, d/dy>."""
    gens = [PolyVectorField.coordinate(2, 0), PolyVectorField.coordinate(2, 1)]
    return FoliationPresentation(gens, InvolutivityCertificate.zeros(2, 2), name="full2")


def rot2() -> FoliationPresentation:
    """Rotations of the plane: a single generator y d/dx - x d/dy (clockwise)."""
    R = PolyVectorField.parse("y ; -x", 2)
    return FoliationPresentation([R], InvolutivityCertificate.zeros(1, 2), name="rot2")


def scale1() -> FoliationPresentation:
    """Scaling of the line: <x d/dx>."""
    X = PolyVectorField.parse("x", 1)
    return FoliationPresentation([X], InvolutivityCertificate.zeros(1, 1), name="scale1")


def sl2_line() -> FoliationPresentation:
    """The sl(2) fields on the line: <d/dx, x d/dx, x^2 d/dx>.

    Certificate: [X1,X2] = X1, [X1,X3] = 2 X2, [X2,X3] = X3.
    """
    gens = [
        PolyVectorField.parse("1", 1),
        PolyVectorField.parse("x", 1),
        PolyVectorField.parse("x^2", 1),
    ]
    cert = InvolutivityCertificate.from_upper(
        3,
        1,
        {
            (0, 1): [1, 0, 0],
            (0, 2): [0, 2, 0],
            (1, 2): [0, 0, 1],
        },
    )
    return FoliationPresentation(gens, cert, name="sl2_line")


def rotz3() -> FoliationPresentation:
    """Rotation of the xy-plane coupled with contraction of z: <y d/dx - x d/dy - z d/dz>."""
    X = PolyVectorField.parse("y ; -x ; -z", 3)
    return FoliationPresentation([X], InvolutivityCertificate.zeros(1, 3), name="rotz3")


def sl2_plane() -> FoliationPresentation:
    """Traceless linear fields on the plane: <x d/dy, y d/dx, x d/dx - y d/dy>.

    All structure coefficients are constants, so the linear flow engine and the
    coefficient transport route both apply:
    [X1,X2] = X3, [X1,X3] = -2 X1, [X2,X3] = 2 X2.
    """
    gens = [
        PolyVectorField.parse("0 ; x", 2),
        PolyVectorField.parse("y ; 0", 2),
        PolyVectorField.parse("x ; -y", 2),
    ]
    cert = InvolutivityCertificate.from_upper(
        3,
        2,
        {
            (0, 1): [0, 0, 1],
            (0, 2): [-2, 0, 0],
            (1, 2): [0, 2, 0],
        },
    )
    return FoliationPresentation(gens, cert, name="sl2_plane")


def noninvolutive_pair() -> FoliationPresentation:
    """<d/dx, x d/dy> with the zero certificate: verification must fail.

    [X1, X2] = d/dy has no polynomial representation in the generators at all,
    so no choice of certificate can make this presentation involutive.
    """
    gens = [PolyVectorField.parse("1 ; 0", 2), PolyVectorField.parse("0 ; x", 2)]
    return FoliationPresentation(gens, InvolutivityCertificate.zeros(2, 2), name="noninvolutive_pair")


def rot2_lifted_r3() -> FoliationPresentation:
    """The pullback of rot2 along the projection R^3 -> R^2: <y d/dx - x d/dy, d/dz>."""
    gens = [PolyVectorField.parse("y ; -x ; 0", 3), PolyVectorField.parse("0 ; 0 ; 1", 3)]
    return FoliationPresentation(gens, InvolutivityCertificate.zeros(2, 3), name="rot2_lifted_r3")


BUILTIN = {
    "full2": full2,
    "rot2": rot2,
    "scale1": scale1,
    "sl2_line": sl2_line,
    "rotz3": rotz3,
    "sl2_plane": sl2_plane,
    "rot2_lifted_r3": rot2_lifted_r3,
}
