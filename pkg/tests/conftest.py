import csv
import io

import pytest

from flowquery.bundled import read_dataset
from flowquery.diagram import Diagram


@pytest.fixture
def cars_text():
    return read_dataset("cars")


@pytest.fixture
def cars_records(cars_text):
    """The car table parsed independently of the package's own loader."""
    return list(csv.DictReader(io.StringIO(cars_text)))


@pytest.fixture
def cars_diagram(cars_text):
    diagram = Diagram()
    diagram.load_dataset(cars_text, "cars")
    return diagram
