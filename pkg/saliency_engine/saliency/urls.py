"""
URL Configuration for the saliency app.

URL Patterns:
    / - Registered artifacts and recent benchmarks
    /artifacts/<id>/ - Layer table and benchmark history of one artifact
    /visualize/ - Upload an image and render saliency masks
"""

from django.urls import path
from . import views

urlpatterns = [
    path("", views.home, name="home"),
    path("artifacts/<int:artifact_id>/", views.artifact_detail, name="artifact_detail"),
    path("visualize/", views.visualize, name="visualize"),
]
