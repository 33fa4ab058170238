from hypothesis import strategies as st

from ovrv.model import ModelParams

positive = st.floats(min_value=1e-3, max_value=5.0, allow_nan=False, allow_infinity=False)
non_negative = st.floats(min_value=0.0, max_value=25.0, allow_nan=False, allow_infinity=False)


@st.composite
def params(draw, k1=positive, k2=positive, tau_e=positive, eta=non_negative):
    return ModelParams(draw(k1), draw(k2), draw(tau_e), draw(eta))
