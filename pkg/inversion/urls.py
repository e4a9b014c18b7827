from django.urls import include, path
from rest_framework.routers import DefaultRouter

from .views import ExperimentRunViewSet

router = DefaultRouter()
router.register(r'runs', ExperimentRunViewSet)

urlpatterns = [
    path('api/', include(router.urls)),
]
