import pytest


TOY_DISCRETE_SYS = """\
# name: toy2
# kind: discrete
2 1 1 3
A *
0.9 0.2
0 0.7
B *
1
0
C *
1 0
"""


@pytest.fixture
def toy_sys_file(tmp_path):
    path = tmp_path / "toy2.sys"
    path.write_text(TOY_DISCRETE_SYS, encoding="utf-8")
    return path
