"""Antichain measures and the dimension of grafted rigid stabilizers.

For an antichain V the product of copies of W_2 grafted at the vertices of V
has level-n log order sum_v (2^(n-|v|) - 1); its ratio against W_2 tends to
mu(V) with gap exactly (|V| - mu(V)) / (2^n - 1).
"""
from fractions import Fraction

from arbor.dimension import mu_vs_dimension
from arbor.permquot import wreath_index_table
from arbor.tree import Antichain, antichain_for_target, mu


def main():
    for gamma in (Fraction(5, 8), Fraction(1, 3), Fraction(0)):
        t = antichain_for_target(gamma, 2, 12)
        print(f"target {gamma}: antichain {t.antichain.to_json()[:6]}"
              f"{' ...' if len(t.antichain) > 6 else ''} measure in [{t.lo}, {t.hi}]")

    W = wreath_index_table(2, 2, 10)
    for vs in (["0"], ["0", "100"], ["00", "01", "10", "11"]):
        V = Antichain.of(vs, 2)
        lo, _ = mu(V, 10)
        rep = mu_vs_dimension([(v.letters, W) for v in V], V, W, 10, 2)
        worst = max(abs(r - lo) * (2 ** n - 1) for n, r in zip(rep.levels, rep.ratios) if n >= 3)
        print(f"\nV = {vs}: mu = {lo}, worst (2^n - 1)|ratio - mu| over n=3..10 is {worst}")
        for n, r in list(zip(rep.levels, rep.ratios))[-3:]:
            print(f"  n={n}: ratio {r} = {float(r):.6f}")


if __name__ == "__main__":
    main()
