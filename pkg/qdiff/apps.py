from django.apps import AppConfig


class QdiffConfig(AppConfig):
    name = 'qdiff'
    verbose_name = 'Jacobi diffusion of the harmonic-measure ratio'
