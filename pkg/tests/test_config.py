import pytest

from vcc.config import ConfigError, PipelineConfig, dump_config, load_config, parse_config, shipped_configs

RECIPES = {
    # name: (T_a, T_o, grid_rows, lr, epochs, batch, w_a, w_m, W)
    "ucsd_ped1": (144, 0.6, 4, 0.001, 30, 128, 1, 1, 5),
    "ucsd_ped2": (144, 0.6, 1, 0.001, 5, 128, 0.5, 1, 5),
    "avenue": (1600, 0.6, 1, 0.001, 10, 128, 1, 1, 5),
    "shanghaitech": (900, 0.65, 4, 0.002, 10, 200, 1, 0.5, 20),
    "subway_exit": (1600, 0.65, 1, 0.001, 30, 128, 0.5, 1, 200),
    "umn_scene1": (100, 0.65, 1, 0.001, 20, 128, 1, 1, 50),
    "umn_scene23": (100, 0.65, 2, 0.001, 20, 128, 1, 0.5, 50),
}


@pytest.mark.parametrize("name", sorted(RECIPES))
def test_shipped_dataset_configs(name):
    c = load_config(name)
    got = (c.T_a, c.T_o, c.grid_rows, c.lr, c.epochs, c.batch_size, c.w_a, c.w_m, c.W)
    assert got == RECIPES[name]
    assert (c.T_s, c.T_b, c.T_ar, c.D, c.h, c.w, c.grid_cols) == (0.5, 1, 10, 5, 32, 32, 1)
    assert c.arch == "st_unet" and c.rect_scheme == "average" and c.ssim_weight in (1.0, 0.1)


def test_all_shipped_configs_parse():
    names = shipped_configs()
    assert set(RECIPES) | {"synthetic"} <= set(names)
    for n in names:
        load_config(n)


def test_parse_types_and_comments():
    c = parse_config("epochs = 7  # comment\nwidths = 8, 16\nmodalities = appearance\nglobal_fallback = no\n")
    assert c.epochs == 7 and c.widths == (8, 16) and c.modalities == ("appearance",) and c.global_fallback is False


def test_unknown_key():
    with pytest.raises(ConfigError, match="unknown"):
        parse_config("bogus = 1\n")


def test_bad_value():
    with pytest.raises(ConfigError):
        parse_config("epochs = many\n")
    with pytest.raises(ConfigError):
        parse_config("T_o = 2\n")
    with pytest.raises(ConfigError):
        parse_config("motion = gradient\n")  # motion models would lack flow targets
    parse_config("motion = gradient\nmodalities = appearance\n")


def test_relative_paths_follow_config_file(tmp_path):
    (tmp_path / "x.cfg").write_text("data_root = d\noutput_root = /abs/out\n")
    c = load_config(tmp_path / "x.cfg")
    assert c.data_root == str(tmp_path / "d") and c.output_root == "/abs/out"


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/no/such.cfg")


def test_hash_ignores_runtime_keys():
    a = PipelineConfig()
    assert a.hash() == a.replace(device="cuda:1", deterministic=False).hash()
    assert a.hash() != a.replace(T_a=145.0).hash()


def test_dump_round_trip():
    c = parse_config("epochs = 3\nwidths = 4,8\nw_m = 0.5\n")
    assert parse_config(dump_config(c)) == c


def test_motion_weight_dropped_without_motion_models():
    c = parse_config("modalities = appearance\n")
    assert c.metric_config().w_m == 0
