import mpmath as mp
import pytest


@pytest.fixture(scope="session")
def mp_qinv():
    """Independent inverse-Q oracle: bisection on mpmath's erfc."""
    mp.mp.dps = 40

    def qinv(p):
        p = mp.mpf(p)
        lo, hi = mp.mpf(-40), mp.mpf(40)
        for _ in range(250):
            mid = (lo + hi) / 2
            if mp.erfc(mid / mp.sqrt(2)) / 2 > p:
                lo = mid
            else:
                hi = mid
        return float((lo + hi) / 2)

    return qinv
