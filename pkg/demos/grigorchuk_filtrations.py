"""Closed-form filtration indices of the Grigorchuk group against quotient data.

Prints the closed-form gamma and Jennings step sizes between N_m and N_(m+1),
the same values measured in the level-5 and level-6 quotients, and the
rigid-stabilizer sandwich limits 1/2^k.
"""
from arbor.grigfilt import d_steps, empirical_crosscheck, gamma_steps, sandwich


def main():
    for m in range(1, 4):
        print(f"m={m}: gamma steps {gamma_steps(m)}, D steps {d_steps(m)}")

    print("\nquotient cross-check (levels 5 and 6):")
    print(empirical_crosscheck(2, 5).to_csv(), end="")

    print("\nsandwich limits:")
    for k in range(5):
        sw = sandwich(k, 20)
        print(f"  k={k}: limit {sw.limit}, window ratios in [{float(sw.ratio_min):.4f}, "
              f"{float(sw.ratio_max):.4f}], bounds respected: {sw.within}")


if __name__ == "__main__":
    main()
