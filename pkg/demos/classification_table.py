"""Three-way classification of T_(omega,m) = (i/m) log(omega - L^m) with CCR witnesses."""

from oscitime.suites import render_table1, table1_report


def main():
    print(render_table1(table1_report(128)))


if __name__ == "__main__":
    main()
