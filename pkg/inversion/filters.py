import django_filters

from .models import ExperimentRun


class ExperimentRunFilter(django_filters.FilterSet):
    """Filtres pour le modèle ExperimentRun"""
    cas = django_filters.ChoiceFilter(choices=ExperimentRun.CAS_CHOICES)
    mode = django_filters.ChoiceFilter(choices=ExperimentRun.MODE_CHOICES)
    statut = django_filters.ChoiceFilter(choices=ExperimentRun.STATUT_CHOICES)
    graine = django_filters.NumberFilter()
    date_debut = django_filters.DateTimeFilter(field_name='date_creation', lookup_expr='gte')
    date_fin = django_filters.DateTimeFilter(field_name='date_creation', lookup_expr='lte')

    class Meta:
        model = ExperimentRun
        fields = ['cas', 'mode', 'statut', 'graine', 'date_debut', 'date_fin']
