import json

import numpy as np
import pytest

from exceptions import InputError
from model_manager import ModelDocument, RunManifest, load_document, load_model, save_model


def test_save_load_save_is_byte_identical(tmp_path, sim_model):
    first = tmp_path / 'first.json'
    second = tmp_path / 'second.json'
    save_model(str(first), sim_model, {'seeds': {'master': 3}})
    document = load_document(str(first))
    save_model(str(second), document.to_model(), document.meta)
    assert first.read_bytes() == second.read_bytes()


def test_document_layout(tmp_path, sim_model):
    path = tmp_path / 'model.json'
    save_model(str(path), sim_model)
    raw = json.loads(path.read_text(encoding='utf-8'))
    assert raw['k'] == 2 and raw['d'] == 2
    assert set(raw['components'][0]) == {'alpha', 'mu', 'lambda', 'sigma'}
    assert raw['components'][0]['sigma'] == [[1.0, -0.5], [-0.5, 1.0]]


def test_loaded_model_matches(tmp_path, sim_model):
    path = tmp_path / 'model.json'
    save_model(str(path), sim_model)
    model = load_model(str(path))
    np.testing.assert_array_equal(model.weights, sim_model.weights)
    for loaded, original in zip(model.components, sim_model.components):
        assert loaded.alpha == original.alpha
        np.testing.assert_array_equal(loaded.lam, original.lam)
        np.testing.assert_array_equal(loaded.sigma, original.sigma)


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_document(str(tmp_path / 'nope.json'))


def test_bad_json(tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text("{not json", encoding='utf-8')
    with pytest.raises(InputError):
        load_document(str(path))


def test_missing_field(tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text(json.dumps({'k': 1, 'd': 1, 'weights': [1.0]}), encoding='utf-8')
    with pytest.raises(InputError):
        load_document(str(path))


def test_component_count_mismatch(sim_model):
    raw = json.loads(ModelDocument.from_model(sim_model).dumps())
    raw['k'] = 3
    with pytest.raises(InputError):
        ModelDocument.model_validate(raw).to_model()


def test_manifest_is_written_next_to_first_output(tmp_path):
    output = tmp_path / 'model.json'
    path = RunManifest(command='fit', seed=4, outputs=[str(output), str(tmp_path / 'labels.csv')]).write()
    assert path == f"{output}.manifest.json"
    manifest = json.loads((tmp_path / 'model.json.manifest.json').read_text(encoding='utf-8'))
    assert manifest['command'] == 'fit'
    assert manifest['seed'] == 4
    assert 'version' in manifest


def test_manifest_without_outputs():
    assert RunManifest(command='eval').write() is None
