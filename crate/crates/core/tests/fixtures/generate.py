"""High-precision reference values frozen into the Rust tests.

Run with `python3 generate.py`; requires mpmath. Every value printed here is
copied verbatim into `tests/fixtures.rs` (core) and the lab acceptance suite.
"""
from mpmath import mp, mpf, erfc, exp, sqrt, pi, log, quad, ncdf

mp.dps = 50


def show(name, value):
    print(f"{name} = {mp.nstr(value, 20)}")


def bracket(wt):
    a = sqrt(wt / 2)
    return 1 / (a * sqrt(pi)) - exp(a * a) * erfc(a)


for a in ["0", "0.5", "0.7071067811865476", "1", "2", "5", "10", "20", "26", "-1", "-3"]:
    show(f"erfc({a})", erfc(mpf(a)))
for a in ["0", "0.5", "1", "2", "5", "6", "8", "10", "30", "100", "1e4"]:
    x = mpf(a)
    show(f"erfcx({a})", exp(x * x) * erfc(x))
for wt in ["1e-3", "1", "2", "1e3", "1e6", "1e10"]:
    show(f"ln bracket({wt})", log(bracket(mpf(wt))))

p = mpf("0.6")
xh = p * log(p) + (1 - p) * log(1 - p)
s1 = sqrt(p * (1 - p)) * log(p / (1 - p))
show("xhat1(0.6)", xh)
show("sigma1^2(0.6)", s1**2)
show("xtilde1(0.6)", xh - s1**2)
show("count mean(0.6)", (log(p) + log(1 - p)) / 2)
show("count var(0.6)", log(p / (1 - p)) ** 2 / 4)

show("gamma headline erfc(1/sqrt2)", erfc(1 / sqrt(2)))
show("gamma F=e^-2e5", erfc(sqrt(2)))
show("gamma F=e^-1e4", erfc(mpf(10) ** 4 / sqrt(2 * mpf(10) ** 10)))
show("log10 e^-1e5", -mpf(10) ** 5 / log(10))


def enumerate_tree(p, eps, n):
    p = mpf(p)
    lp, lq = log(p), log(1 - p)
    xh = p * lp + (1 - p) * lq
    count, measure = 0, mpf(0)
    stack = [(0, mpf(0))]
    while stack:
        k, x = stack.pop()
        if k == n:
            count += 1
            measure += exp(x)
            continue
        for step in (lp, lq):
            nx = x + step
            if nx > (k + 1) * xh - eps:
                stack.append((k + 1, nx))
    return count, measure


for p_, e_, n_ in [("0.6", "0.05", 2), ("0.6", "0.3", 12)]:
    c, m = enumerate_tree(p_, mpf(e_), n_)
    print(f"enumerate p={p_} eps={e_} N={n_}: count={c} measure={mp.nstr(m, 20)}")


def survival(y, s):
    if y <= 0:
        return mpf(0)
    return ncdf((y - s) / sqrt(s)) - exp(2 * y) * ncdf((-y - s) / sqrt(s))


def nu(y, eps, s):
    return exp(eps - y - s / 2) / sqrt(2 * pi * s) * (
        exp(-((y - eps) ** 2) / (2 * s)) - exp(-((y + eps) ** 2) / (2 * s))
    )


def continuum_gamma(L, eps, s1, s2):
    # a fine partition near the wall, where the integrand bends sharply
    pts = [mpf(k) / 4 for k in range(41)] + [12, 15, 20, 30, 40, 60, 80, 120, 160]
    lam = lambda shift: quad(
        lambda y: survival(y - shift, s2) * nu(y, eps, s1),
        [shift + k for k in pts] + [mp.inf],
    )
    return lam(L) / (exp(-L) * lam(0))


for L in [2, 5, 10]:
    show(f"continuum gamma L={L} eps=0.1 s1=25 s2=200", continuum_gamma(L, mpf("0.1"), 25, 200))
show("continuum survival eps=0.1 s=4", survival(mpf("0.1"), 4))
