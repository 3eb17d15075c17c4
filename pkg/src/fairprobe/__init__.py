"""Harvest image metadata from research data repositories and score how well
each record and repository supports spatio-temporal image retrieval.

The package is organised around a five-step workflow: query a repository
registry, select providers that speak OAI-PMH and serve Datacite metadata,
harvest their catalogues, evaluate four per-record quality predicates
(creation date, georeference, license URI, machine retrievability), and
aggregate the outcomes into fixed and rareness-weighted scores.
"""

__version__ = "0.1.0"
