from fractions import Fraction

from hypothesis import strategies as st

# ratios in [2, 4] keep every generated node list a doubling sequence; up to 12 nodes
block_ratios = st.lists(
    st.fractions(min_value=2, max_value=4, max_denominator=16), min_size=0, max_size=11
)
# up to 30 nodes
long_doubling_ratios = st.lists(
    st.fractions(min_value=2, max_value=4, max_denominator=8), min_size=0, max_size=29
)
heads = st.fractions(min_value=Fraction(1, 4), max_value=64, max_denominator=16)
small_rationals = st.fractions(min_value=-10, max_value=10, max_denominator=12)


def geometric_nodes(head, ratios):
    nodes = [Fraction(head)]
    for ratio in ratios:
        nodes.append(nodes[-1] * ratio)
    return nodes
