from django_filters.rest_framework import DjangoFilterBackend
from drf_spectacular.utils import extend_schema
from rest_framework import filters, status, viewsets
from rest_framework.decorators import action
from rest_framework.response import Response

from .filters import ExperimentRunFilter
from .models import ExperimentRun
from .serializers import ExperimentRunDetailSerializer, ExperimentRunSerializer, ParameterRowSerializer
from .services.analytic import get_case
from .services.experiment_service import parameter_table
from .services.physics import MaterialParams


class ExperimentRunViewSet(viewsets.ReadOnlyModelViewSet):
    """Consultation du registre des runs"""
    queryset = ExperimentRun.objects.all()
    serializer_class = ExperimentRunSerializer
    filter_backends = [DjangoFilterBackend, filters.SearchFilter, filters.OrderingFilter]
    filterset_class = ExperimentRunFilter
    search_fields = ['repertoire', 'message_erreur']
    ordering_fields = ['date_creation', 'graine', 'nombre_iterations', 'duree_secondes']
    ordering = ['-date_creation']

    def get_serializer_class(self):
        if self.action == 'retrieve':
            return ExperimentRunDetailSerializer
        return ExperimentRunSerializer

    @extend_schema(responses=ParameterRowSerializer(many=True))
    @action(detail=True, methods=['get'])
    def parametres(self, request, pk=None):
        """Tableau d'estimation des paramètres: estimation, valeur vraie, erreur relative (%)"""
        run = self.get_object()
        if not run.parametres_estimes:
            return Response(
                {'detail': "Aucune estimation disponible pour ce run."},
                status=status.HTTP_404_NOT_FOUND
            )
        table = parameter_table(MaterialParams.from_dict(run.parametres_estimes), get_case(run.cas).material)
        serializer = ParameterRowSerializer(table.to_dict(orient='records'), many=True)
        return Response(serializer.data)
