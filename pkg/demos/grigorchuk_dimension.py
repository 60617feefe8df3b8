"""Congruence quotients of the Grigorchuk group and its Hausdorff dimension.

Builds the level-n quotients, prints the index table, the gradient sequences
s_n and r_n, and the rigorous enclosure of the dimension.
"""
from fractions import Fraction

from arbor.dimension import estimate_ratio, hdim_selfsimilar_enclosure, r_sequence, s_sequence
from arbor.permquot import index_table, wreath_index_table
from arbor.zoo import grigorchuk


def main():
    G = grigorchuk()
    table = index_table(G.gens, 8)
    print("level  log2|G_n|")
    for n, o in enumerate(table.orders):
        print(f"{n:5d}  {o.bit_length() - 1}")

    print("\ns_n:", [s.exact() for s in s_sequence(table)])
    print("r_n:", [r.exact() for r in r_sequence(table)])

    ambient = wreath_index_table(2, 2, table.N)
    rep = estimate_ratio(table, ambient)
    print("\nlevel ratios log|G_n| / log|W_n|:")
    for n, e in zip(rep.levels, rep.exact):
        print(f"  n={n}: {e} = {float(e):.4f}")

    enc = hdim_selfsimilar_enclosure(G.gens, 2, 7, table=table)
    print(f"\nenclosure at N=7: [{float(enc.lo):.12f}, {float(enc.hi):.12f}]"
          f"  (5/8 = {float(Fraction(5, 8))})")


if __name__ == "__main__":
    main()
