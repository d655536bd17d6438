"""Shared builders for problem data."""

import math

import numpy as np
import pytest

from peeldyn.dalembert import ProblemData, SampledFunction


def const(c, a, b):
    return SampledFunction.constant(c, a, b)


def sine(ell0=1.0, k=1, n=4000):
    return SampledFunction.from_callable(lambda x: np.sin(k * math.pi * x / ell0), 0.0, ell0, n,
                                         dfunc=lambda x: k * math.pi / ell0 * np.cos(k * math.pi * x / ell0))


def make_data(nu=0.0, ell0=1.0, u0=None, u1=None, w=None, forcing=None, t_max=5.0):
    return ProblemData(nu=nu, ell0=ell0,
                       u0=u0 if u0 is not None else const(0.0, 0.0, ell0),
                       u1=u1 if u1 is not None else const(0.0, 0.0, ell0),
                       w=w if w is not None else const(0.0, 0.0, t_max),
                       forcing=forcing)


@pytest.fixture
def sine_data():
    return lambda nu=0.0: make_data(nu=nu, u0=sine())
